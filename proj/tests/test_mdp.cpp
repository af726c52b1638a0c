#include <cmath>
#include <random>

#include "camho/channel.hpp"
#include "camho/error.hpp"
#include "camho/process.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace camho;

TEST_CASE("dbm conversions") {
  CHECK(dbm_to_mw({0.0}) == 1.0);
  CHECK(dbm_to_mw({-30.0}) == doctest::Approx(1e-3).epsilon(1e-15));
  // 10^-17.3 evaluated at 40 digits.
  CHECK(std::abs(dbm_to_mw({-173.0}) / 5.011872336272722850e-18 - 1.0) < 1e-4);
  CHECK(dbm_to_mw({-INFINITY}) == 0.0);
  CHECK_THROWS_AS(dbm_to_mw({NAN}), InvalidArgument);
  CHECK(std::isinf(mw_to_dbm(0.0).value));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-200.0, 50.0);
  for (int k = 0; k < 10000; ++k) {
    const double p = u(rng);
    const double back = mw_to_dbm(dbm_to_mw({p})).value;
    REQUIRE(std::abs(back - p) <= 1e-12 * std::abs(p));
  }
}

TEST_CASE("shannon capacity") {
  const LinkBudget b{40e6, -173.0};
  // 40 MHz, -60 dBm over -173 dBm/Hz, high-precision value.
  CHECK(std::abs(capacity_bps({-60.0}, b) / 491383200.1265219102 - 1.0) < 1e-12);
  CHECK(capacity_bps({-INFINITY}, b) == 0.0);
  for (double w : {1e6, 20e6, 40e6, 2.16e9}) {
    const LinkBudget bw{w, -173.0};
    const double c = capacity_bps(mw_to_dbm(bw.noise_mw()), bw);
    CHECK(std::abs(c / w - 1.0) < 1e-9);
  }
  CHECK_THROWS_AS(capacity_bps({-60.0}, LinkBudget{0.0, -173.0}), InvalidArgument);
  CHECK_THROWS_AS(capacity_bps({-60.0}, LinkBudget{-1.0, -173.0}), InvalidArgument);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-150.0, 0.0);
  for (int k = 0; k < 10000; ++k) {
    double p1 = u(rng), p2 = u(rng);
    if (p1 > p2) std::swap(p1, p2);
    REQUIRE(capacity_bps({p1}, b) <= capacity_bps({p2}, b));
  }
  // Doubling the signal and the noise together leaves the SNR alone.
  const double base = capacity_bps({-70.0}, b) / b.bandwidth_hz;
  const LinkBudget noisier{40e6, -173.0 + 10.0 * std::log10(2.0)};
  const double doubled = capacity_bps(mw_to_dbm(2.0 * dbm_to_mw({-70.0})), noisier) / noisier.bandwidth_hz;
  CHECK(std::abs(doubled / base - 1.0) < 1e-12);
}

TEST_CASE("disruption epochs use integer division") {
  ProcessConfig cfg;
  for (auto [ms, epochs] : std::vector<std::pair<int, int>>{{0, 0}, {29, 0}, {30, 1}, {60, 2}, {89, 2}, {120, 4}}) {
    cfg.disruption_ms = ms;
    CHECK(cfg.disruption_epochs() == epochs);
  }
}

TEST_CASE("action set") {
  ProcessConfig cfg;
  cfg.disruption_ms = 120;
  CHECK(action_set({2, 1, 0}, cfg) == std::vector<int>{1, 2});
  CHECK(action_set({2, 2, 3}, cfg) == std::vector<int>{2});
  CHECK(action_mask(1, 0, cfg) == 0b11u);
  CHECK(action_mask(2, 3, cfg) == 0b10u);
  ProcessConfig five = cfg;
  five.num_bs = 5;
  CHECK(action_set({2, 1, 1}, five) == std::vector<int>{1});
  CHECK(action_set({2, 4, 0}, five) == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(action_mask(4, 0, five) == 0b11111u);
  CHECK_FALSE(action_allowed({2, 1, 2}, 2, cfg));
  CHECK(action_allowed({2, 1, 2}, 1, cfg));
}

TEST_CASE("next_assoc and next_counter tables") {
  ProcessConfig cfg;
  cfg.num_bs = 4;
  CHECK(next_assoc(2, cfg) == 2);
  CHECK(next_assoc(1, cfg) == 1);
  CHECK_THROWS_AS(next_assoc(7, cfg), InvalidArgument);
  CHECK_THROWS_AS(next_assoc(0, cfg), InvalidArgument);

  struct Row {
    int tdis_ms, c, a, j, expected;
  };
  // Every branch of the counter rule at 0, 2 and 4 disruption epochs.
  const Row rows[] = {
      {0, 0, 2, 1, 0},   {0, 0, 1, 1, 0},   {60, 0, 2, 1, 2},  {60, 0, 1, 1, 0},  {60, 2, 1, 1, 1},
      {60, 1, 3, 3, 0},  {120, 0, 2, 1, 4}, {120, 0, 1, 2, 4}, {120, 0, 2, 2, 0}, {120, 4, 2, 2, 3},
      {120, 3, 1, 1, 2}, {120, 2, 4, 4, 1}, {120, 1, 4, 4, 0},
  };
  for (const auto& r : rows) {
    cfg.disruption_ms = r.tdis_ms;
    CAPTURE(r.tdis_ms);
    CAPTURE(r.c);
    CAPTURE(r.a);
    CAPTURE(r.j);
    CHECK(next_counter(r.c, r.a, r.j, cfg) == r.expected);
  }
  cfg.disruption_ms = 120;
  CHECK_THROWS_AS(next_counter(2, 1, 2, cfg), ProtocolViolation);
}

TEST_CASE("reward rule") {
  CHECK(reward(0, 4.914e8) == 4.914e8);
  CHECK(reward(3, 4.914e8) == 0.0);
  CHECK(reward(1, 1.0) == 0.0);
  CHECK(reward(0, 0.0) == 0.0);
  CHECK_THROWS_AS(reward(0, -1.0), InvalidArgument);
}

namespace {

// Distinct per-epoch frames (pixel 0 encodes camera and epoch) and distinct capacities.
Trace numbered_trace(int length, int cameras = 2) {
  std::vector<std::vector<double>> powers(2, std::vector<double>(length));
  for (int t = 0; t < length; ++t) {
    powers[0][t] = -60.0 - 0.5 * t;
    powers[1][t] = -70.0 + 0.25 * t;
  }
  auto raw = test::blank_raw(length, cameras, powers, 2, 2);
  for (int i = 0; i < cameras; ++i)
    for (int t = 0; t < length; ++t) raw.frames[i][t * 4] = static_cast<float>((i * 1000 + t) / 100000.0);
  return Trace::from_raw(std::move(raw));
}

float tag(const std::span<const float> f) { return f[0]; }

}  // namespace

TEST_CASE("initial state") {
  const auto tr = numbered_trace(10);
  ProcessConfig cfg;
  const auto s = initial_state(tr, cfg);
  CHECK(s == DecisionState{2, 1, 0});
  const auto stack = stacked_frames(s, tr, cfg, 1);
  REQUIRE(stack.size() == 2);
  CHECK(tag(stack[0]) == tag(tr.frame(1, 2)));
  CHECK(tag(stack[1]) == tag(tr.frame(1, 1)));

  ProcessConfig one = cfg;
  one.stack_depth = 1;
  CHECK(initial_state(tr, one) == DecisionState{1, 1, 0});
  CHECK(stacked_frames(initial_state(tr, one), tr, one, 2).size() == 1);

  const auto short_trace = numbered_trace(1);
  CHECK_THROWS_AS(initial_state(short_trace, cfg), InsufficientData);
}

TEST_CASE("step examples") {
  const auto tr = numbered_trace(10);
  ProcessConfig cfg;
  const DecisionState s{4, 1, 0};

  auto out = step(s, 2, tr, cfg);
  CHECK(out.next_state == DecisionState{5, 2, 0});
  CHECK(out.reward == tr.capacity(2, 5));
  CHECK_FALSE(out.terminal);

  cfg.disruption_ms = 60;
  out = step(s, 2, tr, cfg);
  CHECK(out.next_state == DecisionState{5, 2, 2});
  CHECK(out.reward == 0.0);

  out = step(s, 1, tr, cfg);
  CHECK(out.next_state == DecisionState{5, 1, 0});
  CHECK(out.reward == tr.capacity(1, 5));

  // Counter running down: forced stay, reward only once it reaches zero.
  out = step({5, 2, 2}, 2, tr, cfg);
  CHECK(out.next_state == DecisionState{6, 2, 1});
  CHECK(out.reward == 0.0);
  out = step({6, 2, 1}, 2, tr, cfg);
  CHECK(out.next_state == DecisionState{7, 2, 0});
  CHECK(out.reward == tr.capacity(2, 7));

  CHECK_THROWS_AS(step({5, 2, 2}, 1, tr, cfg), ProtocolViolation);
  CHECK_THROWS_AS(step(s, 3, tr, cfg), ProtocolViolation);

  out = step({9, 1, 0}, 1, tr, cfg);
  CHECK(out.terminal);
  CHECK_THROWS_AS(step({10, 1, 0}, 1, tr, cfg), EndOfTrace);
}

TEST_CASE("random legal walks obey the disruption and frame-stack rules") {
  const auto tr = numbered_trace(200);
  for (int tdis : {0, 30, 60, 120}) {
    for (int depth : {1, 2, 3}) {
      ProcessConfig cfg;
      cfg.disruption_ms = tdis;
      cfg.stack_depth = depth;
      const int D = cfg.disruption_epochs();
      std::mt19937_64 rng(tdis * 10 + depth);
      auto s = initial_state(tr, cfg);
      int since_handover = -1;  // epochs since the last handover, -1 before any
      bool terminal = false;
      while (!terminal) {
        const auto allowed = action_set(s, cfg);
        if (tdis == 0) REQUIRE(allowed.size() == 2);
        const int a = allowed[rng() % allowed.size()];
        const auto out = step(s, a, tr, cfg);
        const auto again = step(s, a, tr, cfg);
        REQUIRE((again.next_state == out.next_state && again.reward == out.reward && again.terminal == out.terminal));
        const bool handover = s.disrupt_counter == 0 && a != s.assoc_bs;
        if (handover) since_handover = 0;
        else if (since_handover >= 0) ++since_handover;
        const int next_t = out.next_state.epoch;
        REQUIRE(next_t == s.epoch + 1);
        if (since_handover >= 0 && since_handover < D) {
          REQUIRE(out.next_state.disrupt_counter == D - since_handover);
          REQUIRE(out.reward == 0.0);
        } else {
          REQUIRE(out.next_state.disrupt_counter == 0);
          REQUIRE(out.reward == tr.capacity(a, next_t));
        }
        const auto stack = stacked_frames(out.next_state, tr, cfg, 2);
        REQUIRE(static_cast<int>(stack.size()) == depth);
        for (int k = 0; k < depth; ++k) REQUIRE(tag(stack[k]) == tag(tr.frame(2, next_t - k)));
        terminal = out.terminal;
        REQUIRE(terminal == (next_t == tr.length()));
        s = out.next_state;
      }
    }
  }
}
