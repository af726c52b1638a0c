#include <cmath>
#include <cstring>
#include <random>

#include "camho/agent.hpp"
#include "camho/error.hpp"
#include "camho/scenario.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace camho;

namespace {

bool same_bits(const nn::Params& a, const nn::Params& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Trace small_scene_trace(int length) {
  auto s = reference_scenario();
  s.duration_epochs = length;
  return synthesize_trace(s);
}

TrainConfig quick_config() {
  TrainConfig c;
  c.iterations = 3;
  c.minibatch = 8;
  c.replay_capacity = 500;
  c.target_update_period = 50;
  c.train_every = 4;
  return c;
}

}  // namespace

TEST_CASE("epsilon schedule") {
  TrainConfig c;
  CHECK(epsilon_at(0, c) == 1.0);
  CHECK(epsilon_at(50, c) == doctest::Approx(0.5));
  CHECK(epsilon_at(99, c) == doctest::Approx(0.01));
  CHECK(epsilon_at(500, c) == 0.01);
  CHECK(epsilon_at(98, c) == doctest::Approx(0.02));
}

TEST_CASE("select_action") {
  std::mt19937_64 rng(3);
  const std::vector<double> q{1.0, 2.0};
  CHECK(select_action(q, 0b11, 0.0, rng) == 2);
  CHECK(select_action(q, 0b01, 1.0, rng) == 1);
  CHECK(select_action(q, 0b01, 0.0, rng) == 1);
  const std::vector<double> tie{4.0, 4.0, 1.0};
  CHECK(select_action(tie, 0b111, 0.0, rng) == 1);
  const std::vector<double> masked{0.2, 9.9};
  CHECK(greedy_action(masked, 0b01) == 1);
  CHECK_THROWS_AS(select_action(q, 0, 0.0, rng), ProtocolViolation);

  // A forced action draws nothing from the generator.
  std::mt19937_64 a(9), b(9);
  select_action(q, 0b10, 1.0, a);
  CHECK(a() == b());

  std::mt19937_64 draws(12345);
  int ones = 0;
  for (int k = 0; k < 10000; ++k) ones += select_action(q, 0b11, 1.0, draws) == 1;
  CHECK(std::abs(ones - 5000) <= 300);
}

TEST_CASE("uniform helpers") {
  std::mt19937_64 rng(1);
  std::vector<int> counts(3, 0);
  for (int k = 0; k < 30000; ++k) ++counts[uniform_index(rng, 3)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  for (int k = 0; k < 1000; ++k) {
    const double u = uniform_unit(rng);
    REQUIRE((u >= 0.0 && u < 1.0));
  }
  CHECK_THROWS(uniform_index(rng, 0));
}

TEST_CASE("td targets") {
  std::vector<Experience> batch(3);
  batch[0].reward = 0.5;
  batch[0].terminal = true;
  batch[1].reward = 0.0;
  batch[1].next_assoc_bs = 1;
  batch[1].next_counter = 2;
  batch[1].next_mask = 0b01;
  batch[2].reward = 0.25;
  batch[2].next_mask = 0b11;
  const std::vector<double> tq{7.0, 7.0, 0.2, 9.9, 1.0, 3.0};
  const auto t = td_targets(batch, tq, 2, 0.99);
  CHECK(t[0] == 0.5);
  CHECK(t[1] == doctest::Approx(0.198));
  CHECK(t[2] == doctest::Approx(0.25 + 0.99 * 3.0));
  const auto myopic = td_targets(batch, tq, 2, 0.0);
  CHECK(myopic[0] == 0.5);
  CHECK(myopic[1] == 0.0);
  CHECK(myopic[2] == 0.25);
}

TEST_CASE("replay buffer") {
  ReplayBuffer buf(3);
  for (int k = 0; k < 5; ++k) {
    Experience e;
    e.epoch = k;
    buf.push(e);
  }
  CHECK(buf.size() == 3);
  std::vector<int> epochs;
  for (int k = 0; k < 3; ++k) epochs.push_back(buf[k].epoch);
  std::sort(epochs.begin(), epochs.end());
  CHECK(epochs == std::vector<int>{2, 3, 4});
  std::mt19937_64 rng(5);
  std::vector<int> hits(3, 0);
  for (int i : buf.sample(3000, rng)) {
    REQUIRE((i >= 0 && i < 3));
    ++hits[i];
  }
  for (int h : hits) CHECK(std::abs(h - 1000) < 150);
  buf.clear();
  CHECK(buf.size() == 0);
}

TEST_CASE("config validation and json") {
  TrainConfig c;
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.minibatch = 200;
  c.replay_capacity = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = quick_config();
  c.optimizer.learning_rate = 1e-3;
  c.single_camera = 1;
  const auto back = train_config_from_json(train_config_to_json(c));
  CHECK(train_config_to_json(back) == train_config_to_json(c));
  CHECK(train_config_from_json(nlohmann::json::object()).iterations == 1000);
  CHECK_THROWS_AS(train_config_from_json({{"iteratoins", 5}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json({{"gamma", "high"}}), ConfigError);
}

TEST_CASE("one step on a trace of length N + 1") {
  const auto tr = small_scene_trace(3);
  const auto [train_part, eval_part] = split(tr, {2});
  (void)eval_part;
  auto cfg = quick_config();
  cfg.minibatch = 1;
  const auto pcfg = process_config_for(tr, cfg);
  const auto three = tr.segment(1, 3);
  Learner learner(cfg, pcfg, tr);
  const auto stats = learner.run_iteration(three, 0);
  CHECK(stats.steps == 1);
  CHECK(learner.replay().size() == 1);
  CHECK(learner.replay()[0].terminal);
  CHECK_THROWS_AS(learner.run_iteration(tr.segment(1, 2), 1), InsufficientData);
}

TEST_CASE("learner invariants: masking, replay masks, target syncs") {
  const auto tr = small_scene_trace(150);
  for (int tdis : {0, 60, 120}) {
    auto cfg = quick_config();
    cfg.disruption_ms = tdis;
    cfg.target_update_period = 37;
    const auto pcfg = process_config_for(tr, cfg);
    Learner learner(cfg, pcfg, tr);
    nn::Params last_target = learner.target_params();
    long long steps = 0;
    learner.on_step = [&](const Experience& e) {
      ++steps;
      REQUIRE((action_mask(e.assoc_bs, e.counter, pcfg) >> (e.action - 1) & 1u));
      REQUIRE(e.next_mask == action_mask(e.next_assoc_bs, e.next_counter, pcfg));
      REQUIRE(e.next_assoc_bs == e.action);
      REQUIRE(e.next_counter == next_counter(e.counter, e.action, e.assoc_bs, pcfg));
      // Checked before this step's own sync can happen.
      if (!same_bits(learner.target_params(), last_target)) {
        REQUIRE((steps - 1) % cfg.target_update_period == 0);
        last_target = learner.target_params();
      }
    };
    for (int k = 0; k < 4; ++k) learner.run_iteration(tr, k);
    CHECK(learner.total_steps() == 4 * (150 - 2));
    REQUIRE(!learner.target_syncs().empty());
    for (long long s : learner.target_syncs()) CHECK(s % cfg.target_update_period == 0);
    CHECK(static_cast<long long>(learner.target_syncs().size()) == learner.total_steps() / cfg.target_update_period);
  }
}

TEST_CASE("training is deterministic per seed") {
  const auto tr = small_scene_trace(160);
  auto cfg = quick_config();
  const auto a = train(tr, {100}, cfg);
  const auto b = train(tr, {100}, cfg);
  CHECK(same_bits(a.best.params, b.best.params));
  CHECK(a.best_iteration == b.best_iteration);
  REQUIRE(a.history.size() == 3);
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].eval_avg_bps == b.history[k].eval_avg_bps);
    CHECK(a.history[k].iteration == static_cast<int>(k));
    CHECK(a.history[k].epsilon == epsilon_at(static_cast<int>(k), cfg));
  }
  // Best iteration = highest evaluation average, earliest on ties.
  int best = 0;
  for (std::size_t k = 1; k < a.history.size(); ++k)
    if (a.history[k].eval_avg_bps > a.history[best].eval_avg_bps) best = static_cast<int>(k);
  CHECK(a.best_iteration == best);
  CHECK(a.best_eval_avg_bps == a.history[best].eval_avg_bps);
  CHECK(a.best.metadata["best_iteration"] == best);

  auto other = cfg;
  other.seed = 2;
  CHECK_FALSE(same_bits(train(tr, {100}, other).best.params, a.best.params));

  cfg.iterations = 1;
  const auto one = train(tr, {100}, cfg);
  CHECK(one.history.size() == 1);
  CHECK(one.best_iteration == 0);
}

TEST_CASE("evaluation averages") {
  // Constant capacity: any policy averages that capacity at T_dis = 0.
  const std::vector<std::vector<double>> p(2, std::vector<double>(40, -60.0));
  const auto flat = test::blank_trace(40, 2, p, 40, 40);
  TrainConfig cfg;
  const auto pcfg = process_config_for(flat, cfg);
  nn::Network net(nn::q_arch_for(flat, pcfg, cfg.cameras(pcfg)));
  const auto params = nn::init_params(net.layout(), 4);
  const auto log = evaluate_policy(net, params, flat, pcfg, cfg.cameras(pcfg));
  CHECK(log.average_bps == doctest::Approx(flat.capacity(1, 1)).epsilon(1e-14));
  CHECK(log.steps.size() == 38);

  // One handover with two disruption epochs over M decisions: C (M - 2) / M.
  ProcessConfig slow = pcfg;
  slow.disruption_ms = 60;
  int calls = 0;
  const auto once = rollout(flat, slow, [&](const DecisionState& s, const Trace&) {
    return calls++ == 5 ? 3 - s.assoc_bs : s.assoc_bs;
  });
  CHECK(once.handovers == 1);
  CHECK(once.average_bps == doctest::Approx(flat.capacity(1, 1) * 36.0 / 38.0).epsilon(1e-14));
}

TEST_CASE("single-camera mode halves the image channels") {
  const auto tr = small_scene_trace(10);
  TrainConfig cfg;
  const auto pcfg = process_config_for(tr, cfg);
  CHECK(nn::q_arch_for(tr, pcfg, cfg.cameras(pcfg)).in_channels == 4);
  cfg.single_camera = 1;
  CHECK(cfg.cameras(pcfg) == std::vector<int>{1});
  CHECK(nn::q_arch_for(tr, pcfg, cfg.cameras(pcfg)).in_channels == 2);
  cfg.single_camera = 3;
  CHECK_THROWS(cfg.cameras(pcfg));
}
