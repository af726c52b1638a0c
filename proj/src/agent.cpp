#include "camho/agent.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "camho/error.hpp"

namespace camho {

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("train config: gamma must be in [0, 1)");
  if (iterations < 1) throw ConfigError("train config: iterations must be >= 1");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_end >= 0.0 && epsilon_end <= 1.0) ||
      epsilon_end > epsilon_start || epsilon_decrement < 0.0)
    throw ConfigError("train config: epsilon schedule must satisfy 0 <= end <= start <= 1, decrement >= 0");
  if (minibatch < 1) throw ConfigError("train config: minibatch must be >= 1");
  if (replay_capacity < minibatch) throw ConfigError("train config: minibatch exceeds replay capacity");
  if (target_update_period < 1) throw ConfigError("train config: target_update_period must be >= 1");
  if (train_every < 1) throw ConfigError("train config: train_every must be >= 1");
  if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) throw ConfigError("train config: reward_scale must be > 0");
  if (!(huber_delta > 0.0)) throw ConfigError("train config: huber_delta must be > 0");
  if (!(optimizer.learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be > 0");
  if (!(optimizer.decay >= 0.0 && optimizer.decay < 1.0)) throw ConfigError("train config: rmsprop decay must be in [0, 1)");
  if (!(optimizer.epsilon > 0.0)) throw ConfigError("train config: rmsprop epsilon must be > 0");
  if (single_camera < 0) throw ConfigError("train config: single_camera must be >= 0");
  if (stack_depth < 1) throw ConfigError("train config: stack_depth must be >= 1");
  if (disruption_ms < 0) throw ConfigError("train config: disruption_ms must be >= 0");
}

std::vector<int> TrainConfig::cameras(const ProcessConfig& pcfg) const {
  if (single_camera == 0) return nn::all_cameras(pcfg);
  if (single_camera > pcfg.num_cameras)
    throw ConfigError("train config: single_camera " + std::to_string(single_camera) + " but the trace has " +
                      std::to_string(pcfg.num_cameras) + " cameras");
  return {single_camera};
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"iterations", c.iterations},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_end", c.epsilon_end},
          {"epsilon_decrement", c.epsilon_decrement},
          {"minibatch", c.minibatch},
          {"replay_capacity", c.replay_capacity},
          {"reset_replay_each_iteration", c.reset_replay_each_iteration},
          {"target_update_period", c.target_update_period},
          {"train_every", c.train_every},
          {"reward_scale", c.reward_scale},
          {"huber_delta", c.huber_delta},
          {"init_output_bias", c.init_output_bias},
          {"optimizer", nn::to_string(c.optimizer.mode)},
          {"learning_rate", c.optimizer.learning_rate},
          {"rmsprop_decay", c.optimizer.decay},
          {"rmsprop_epsilon", c.optimizer.epsilon},
          {"single_camera", c.single_camera},
          {"stack_depth", c.stack_depth},
          {"disruption_ms", c.disruption_ms},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config: expected a JSON object");
  TrainConfig c;
  const nlohmann::json defaults = train_config_to_json(c);
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw ConfigError("train config: unknown key '" + key + "'");
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("train config: bad value for '") + key + "'");
    }
  };
  get("gamma", c.gamma);
  get("iterations", c.iterations);
  get("epsilon_start", c.epsilon_start);
  get("epsilon_end", c.epsilon_end);
  get("epsilon_decrement", c.epsilon_decrement);
  get("minibatch", c.minibatch);
  get("replay_capacity", c.replay_capacity);
  get("reset_replay_each_iteration", c.reset_replay_each_iteration);
  get("target_update_period", c.target_update_period);
  get("train_every", c.train_every);
  get("reward_scale", c.reward_scale);
  get("huber_delta", c.huber_delta);
  get("init_output_bias", c.init_output_bias);
  std::string mode = nn::to_string(c.optimizer.mode);
  get("optimizer", mode);
  c.optimizer.mode = nn::optimizer_mode_from_string(mode);
  get("learning_rate", c.optimizer.learning_rate);
  get("rmsprop_decay", c.optimizer.decay);
  get("rmsprop_epsilon", c.optimizer.epsilon);
  get("single_camera", c.single_camera);
  get("stack_depth", c.stack_depth);
  get("disruption_ms", c.disruption_ms);
  get("seed", c.seed);
  c.validate();
  return c;
}

ProcessConfig process_config_for(const Trace& trace, const TrainConfig& cfg) {
  ProcessConfig p;
  p.num_cameras = trace.num_cameras();
  p.num_bs = trace.num_bs();
  p.stack_depth = cfg.stack_depth;
  p.epoch_interval_ms = trace.epoch_interval_ms();
  p.disruption_ms = cfg.disruption_ms;
  p.validate();
  return p;
}

double epsilon_at(int iteration, const TrainConfig& cfg) {
  if (iteration < 0) throw InvalidArgument("epsilon_at: negative iteration");
  return std::max(cfg.epsilon_start - cfg.epsilon_decrement * iteration, cfg.epsilon_end);
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw InvalidArgument("uniform_index: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return v % n;
}

double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int greedy_action(std::span<const double> q, unsigned allowed_mask) {
  int best = 0;
  for (int a = 1; a <= static_cast<int>(q.size()); ++a)
    if (allowed_mask >> (a - 1) & 1u)
      if (best == 0 || q[a - 1] > q[best - 1]) best = a;
  if (best == 0) throw ProtocolViolation("greedy_action: empty action set");
  return best;
}

namespace {

int nth_allowed(unsigned mask, std::uint64_t n) {
  for (int a = 1; mask; ++a, mask >>= 1)
    if (mask & 1u && n-- == 0) return a;
  return 0;
}

// Shared by select_action and the training loop; q is only computed on a
// greedy draw.
template <class QFn>
int epsilon_greedy(unsigned allowed_mask, double epsilon, std::mt19937_64& rng, QFn&& q) {
  if (allowed_mask == 0) throw ProtocolViolation("select_action: empty action set");
  const int n = std::popcount(allowed_mask);
  if (n == 1) return std::countr_zero(allowed_mask) + 1;
  if (uniform_unit(rng) < epsilon) return nth_allowed(allowed_mask, uniform_index(rng, n));
  return greedy_action(q(), allowed_mask);
}

}  // namespace

int select_action(std::span<const double> q, unsigned allowed_mask, double epsilon, std::mt19937_64& rng) {
  if (q.size() < 32 && allowed_mask >> q.size()) throw ProtocolViolation("select_action: action set exceeds q length");
  return epsilon_greedy(allowed_mask, epsilon, rng, [&] { return q; });
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw InvalidArgument("replay buffer capacity must be >= 1");
  items_.reserve(std::min(capacity, 1 << 20));
}

void ReplayBuffer::push(const Experience& e) {
  if (size() < capacity_) {
    items_.push_back(e);
  } else {
    items_[next_] = e;
    next_ = (next_ + 1) % capacity_;
  }
}

void ReplayBuffer::clear() {
  items_.clear();
  next_ = 0;
}

std::vector<int> ReplayBuffer::sample(int count, std::mt19937_64& rng) const {
  if (items_.empty()) throw InvalidArgument("replay buffer is empty");
  std::vector<int> idx(count);
  for (auto& k : idx) k = static_cast<int>(uniform_index(rng, items_.size()));
  return idx;
}

std::vector<double> td_targets(std::span<const Experience> batch, std::span<const double> target_q, int num_bs,
                               double gamma) {
  if (batch.empty()) throw InvalidArgument("td_targets: empty batch");
  if (target_q.size() != batch.size() * num_bs) throw InvalidArgument("td_targets: target_q has wrong size");
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& e = batch[i];
    y[i] = e.reward;
    if (e.terminal) continue;
    const auto q = target_q.subspan(i * num_bs, num_bs);
    y[i] += gamma * q[greedy_action(q, e.next_mask) - 1];
  }
  return y;
}

Learner::Learner(const TrainConfig& cfg, const ProcessConfig& pcfg, const Trace& reference_trace)
    : cfg_(cfg),
      pcfg_(pcfg),
      cameras_(cfg.cameras(pcfg)),
      net_(nn::q_arch_for(reference_trace, pcfg, cameras_)),
      params_(nn::init_params(net_.layout(), cfg.seed)),
      target_(params_),
      replay_(cfg.replay_capacity),
      rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL),
      grad_(net_.parameter_count()) {
  cfg_.validate();
}

IterationStats Learner::run_iteration(const Trace& train, int iteration) {
  if (train.length() <= pcfg_.stack_depth)
    throw InsufficientData("training trace of length " + std::to_string(train.length()) +
                           " leaves no decision step after the first " + std::to_string(pcfg_.stack_depth) +
                           " frames");
  bind_trace(train);
  if (total_steps_ == 0 && cfg_.init_output_bias) init_output_bias(train);
  if (cfg_.reset_replay_each_iteration) replay_.clear();
  const double eps = epsilon_at(iteration, cfg_);
  IterationStats stats;
  double loss_sum = 0.0;
  DecisionState s = initial_state(train, pcfg_);
  for (;;) {
    const unsigned mask = action_mask(s.assoc_bs, s.disrupt_counter, pcfg_);
    const int a = epsilon_greedy(mask, eps, rng_, [&] {
      return net_.forward(params_, nn::encode_sparse(s, train, pcfg_, cameras_).view());
    });
    const StepOutcome out = step(s, a, train, pcfg_);
    Experience e;
    e.epoch = s.epoch;
    e.assoc_bs = s.assoc_bs;
    e.counter = s.disrupt_counter;
    e.action = a;
    e.reward = out.reward / cfg_.reward_scale;
    e.next_assoc_bs = out.next_state.assoc_bs;
    e.next_counter = out.next_state.disrupt_counter;
    e.next_mask = action_mask(e.next_assoc_bs, e.next_counter, pcfg_);
    e.terminal = out.terminal;
    replay_.push(e);
    if (on_step) on_step(e);
    ++total_steps_;
    ++stats.steps;
    if (replay_.size() >= cfg_.minibatch && total_steps_ % cfg_.train_every == 0) {
      loss_sum += update(train);
      ++stats.updates;
    }
    if (total_steps_ % cfg_.target_update_period == 0) {
      target_ = params_;
      syncs_.push_back(total_steps_);
      ++generation_;
    }
    if (out.terminal) break;
    s = out.next_state;
  }
  stats.mean_loss = stats.updates ? loss_sum / stats.updates : 0.0;
  return stats;
}

double Learner::update(const Trace& train) {
  const int B = cfg_.minibatch;
  const int J = pcfg_.num_bs;
  const auto idx = replay_.sample(B, rng_);
  std::vector<Experience> batch(B);
  for (int i = 0; i < B; ++i) batch[i] = replay_[idx[i]];

  std::vector<nn::SparseState> states, next_states;
  states.reserve(B);
  next_states.reserve(B);
  for (const auto& e : batch) {
    states.push_back(nn::encode_sparse({e.epoch, e.assoc_bs, e.counter}, train, pcfg_, cameras_));
    next_states.push_back(nn::encode_sparse({e.epoch + 1, e.next_assoc_bs, e.next_counter}, train, pcfg_, cameras_));
  }
  std::vector<nn::SparseInput> xs, next_xs;
  std::vector<int> live;  // batch positions that bootstrap
  for (int i = 0; i < B; ++i) {
    xs.push_back(states[i].view());
    if (!batch[i].terminal) {
      live.push_back(i);
      next_xs.push_back(next_states[i].view());
    }
  }
  std::vector<double> target_q(static_cast<std::size_t>(B) * J, 0.0);
  std::vector<int> missing;
  std::vector<nn::SparseInput> missing_xs;
  for (std::size_t k = 0; k < live.size(); ++k) {
    const auto& e = batch[live[k]];
    const std::size_t key = cache_key(e.epoch + 1, e.next_assoc_bs, e.next_counter);
    if (tq_stamp_[key] == generation_) {
      std::copy_n(tq_cache_.begin() + key * J, J, target_q.begin() + static_cast<std::size_t>(live[k]) * J);
    } else {
      missing.push_back(live[k]);
      missing_xs.push_back(next_xs[k]);
    }
  }
  if (!missing.empty()) {
    std::vector<double> q(missing.size() * J);
    net_.forward_batch(nn::PreparedParams(net_, target_), missing_xs, q);
    for (std::size_t k = 0; k < missing.size(); ++k) {
      const auto& e = batch[missing[k]];
      const std::size_t key = cache_key(e.epoch + 1, e.next_assoc_bs, e.next_counter);
      std::copy_n(q.begin() + k * J, J, tq_cache_.begin() + key * J);
      tq_stamp_[key] = generation_;
    }
    for (int i : live) {
      const auto& e = batch[i];
      const std::size_t key = cache_key(e.epoch + 1, e.next_assoc_bs, e.next_counter);
      std::copy_n(tq_cache_.begin() + key * J, J, target_q.begin() + static_cast<std::size_t>(i) * J);
    }
  }
  const auto y = td_targets(batch, target_q, J, cfg_.gamma);

  const double delta = cfg_.huber_delta;
  const double inv_b = 1.0 / B;
  nn::UpstreamFn upstream = [&](int i, std::span<const double> q, std::span<double> dq) {
    const int a = batch[i].action - 1;
    const double err = q[a] - y[i];
    const double abs_err = std::abs(err);
    dq[a] = (abs_err <= delta ? err : std::copysign(delta, err)) * inv_b;
    return (abs_err <= delta ? 0.5 * err * err : delta * (abs_err - 0.5 * delta)) * inv_b;
  };
  const double loss = net_.gradient_batch(nn::PreparedParams(net_, params_), xs, upstream, grad_);
  nn::optimizer_step(params_, grad_, opt_, cfg_.optimizer);
  return loss;
}

void Learner::bind_trace(const Trace& train) {
  const bool same = bound_ && bound_->shares_storage_with(train) && bound_->length() == train.length() &&
                    bound_->frame(1, 1).data() == train.frame(1, 1).data();
  if (same) return;
  bound_ = train;
  const std::size_t keys = static_cast<std::size_t>(train.length() + 1) * pcfg_.num_bs * (pcfg_.disruption_epochs() + 1);
  tq_cache_.assign(keys * pcfg_.num_bs, 0.0);
  tq_stamp_.assign(keys, 0);
  // Replay entries refer to epochs of the bound trace.
  replay_.clear();
}

void Learner::init_output_bias(const Trace& train) {
  double sum = 0.0;
  for (int j = 1; j <= train.num_bs(); ++j)
    for (double c : train.capacity_series(j)) sum += c;
  const double mean = sum / (static_cast<double>(train.length()) * train.num_bs());
  const double q0 = mean / cfg_.reward_scale / (1.0 - cfg_.gamma);
  const auto& out = net_.layout().denses().back();
  for (int k = 0; k < out.out; ++k) params_[out.b_off + k] = q0;
  target_ = params_;
  ++generation_;
}

std::size_t Learner::cache_key(int epoch, int bs, int counter) const {
  return (static_cast<std::size_t>(epoch) * pcfg_.num_bs + (bs - 1)) * (pcfg_.disruption_epochs() + 1) + counter;
}

Policy greedy_policy(const nn::Network& net, const nn::Params& params, const ProcessConfig& pcfg,
                     const std::vector<int>& cameras) {
  auto prepared = std::make_shared<nn::PreparedParams>(net, params);
  return [&net, prepared, pcfg, cameras](const DecisionState& s, const Trace& trace) {
    const unsigned mask = action_mask(s.assoc_bs, s.disrupt_counter, pcfg);
    if (std::popcount(mask) == 1) return std::countr_zero(mask) + 1;
    const auto q = net.forward(*prepared, nn::encode_sparse(s, trace, pcfg, cameras).view());
    return greedy_action(q, mask);
  };
}

PolicyLog evaluate_policy(const nn::Network& net, const nn::Params& params, const Trace& trace,
                          const ProcessConfig& pcfg, const std::vector<int>& cameras) {
  if (trace.length() <= pcfg.stack_depth)
    throw InsufficientData("evaluation trace of length " + std::to_string(trace.length()) +
                           " leaves no decision step");
  return rollout(trace, pcfg, greedy_policy(net, params, pcfg, cameras));
}

nlohmann::json checkpoint_metadata(const Trace& trace, const ProcessConfig& pcfg, const std::vector<int>& cameras) {
  return {{"cameras", cameras},
          {"num_cameras", pcfg.num_cameras},
          {"num_bs", pcfg.num_bs},
          {"stack_depth", pcfg.stack_depth},
          {"frame_width", trace.frame_width()},
          {"frame_height", trace.frame_height()},
          {"epoch_interval_ms", pcfg.epoch_interval_ms},
          {"disruption_ms", pcfg.disruption_ms}};
}

TrainResult train(const Trace& trace, const SplitSpec& split_spec, const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const auto [train_part, eval_part] = split(trace, split_spec);
  const ProcessConfig pcfg = process_config_for(trace, cfg);
  Learner learner(cfg, pcfg, trace);

  TrainResult r;
  r.best.arch = learner.network().arch();
  r.best.metadata = checkpoint_metadata(trace, pcfg, learner.cameras());
  bool have_best = false;
  for (int k = 0; k < cfg.iterations; ++k) {
    const IterationStats stats = learner.run_iteration(train_part, k);
    const PolicyLog log = evaluate_policy(learner.network(), learner.params(), eval_part, pcfg, learner.cameras());
    const HistoryRow row{k, epsilon_at(k, cfg), log.average_bps};
    r.history.push_back(row);
    if (!have_best || row.eval_avg_bps > r.best_eval_avg_bps) {
      have_best = true;
      r.best_iteration = k;
      r.best_eval_avg_bps = row.eval_avg_bps;
      r.best.params = learner.params();
    }
    if (progress) progress(row, stats);
  }
  r.best.metadata["best_iteration"] = r.best_iteration;
  return r;
}

}  // namespace camho
