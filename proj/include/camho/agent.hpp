#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "camho/baselines.hpp"
#include "camho/nn/checkpoint.hpp"
#include "camho/nn/encoder.hpp"
#include "camho/nn/network.hpp"
#include "camho/nn/optimizer.hpp"
#include "camho/process.hpp"
#include "camho/trace.hpp"
#include "json.hpp"

namespace camho {

struct TrainConfig {
  double gamma = 0.99;
  int iterations = 1000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  double epsilon_decrement = 0.01;  // per iteration
  int minibatch = 32;
  int replay_capacity = 100000;
  bool reset_replay_each_iteration = false;
  int target_update_period = 10000;  // environment steps
  int train_every = 1;               // environment steps per gradient update
  double reward_scale = 1e9;         // rewards are divided by this for training
  double huber_delta = 1.0;
  // Start the output biases at the discounted return of the mean training
  // reward instead of zero.
  bool init_output_bias = true;
  nn::OptimizerConfig optimizer;
  int single_camera = 0;  // 0: every camera; otherwise the only camera used
  int stack_depth = 2;
  int disruption_ms = 0;
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<int> cameras(const ProcessConfig& pcfg) const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are an error.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Decision-process settings implied by a trace and a training config.
ProcessConfig process_config_for(const Trace& trace, const TrainConfig& cfg);

double epsilon_at(int iteration, const TrainConfig& cfg);

/// Uniform integer in [0, n) by rejection, independent of the standard
/// library's distribution implementations.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);
double uniform_unit(std::mt19937_64& rng);

/// epsilon-greedy over the allowed BSs (bit j-1 of allowed_mask). A forced
/// action consumes no randomness. Greedy ties go to the lowest index.
int select_action(std::span<const double> q, unsigned allowed_mask, double epsilon, std::mt19937_64& rng);
int greedy_action(std::span<const double> q, unsigned allowed_mask);

/// Frames are not copied: an experience names its epochs in the training
/// trace, which determine the frame stacks.
struct Experience {
  int epoch = 0;  // state epoch t
  int assoc_bs = 1;
  int counter = 0;
  int action = 1;
  double reward = 0.0;  // scaled
  int next_assoc_bs = 1;
  int next_counter = 0;
  unsigned next_mask = 0;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  void push(const Experience& e);
  void clear();
  int size() const { return static_cast<int>(items_.size()); }
  int capacity() const { return capacity_; }
  const Experience& operator[](int k) const { return items_[k]; }
  /// Uniform draw with replacement over the current contents.
  std::vector<int> sample(int count, std::mt19937_64& rng) const;

 private:
  int capacity_;
  int next_ = 0;
  std::vector<Experience> items_;
};

/// Bootstrapped targets r + gamma * max over allowed a' of Q_target(s', a');
/// just r for terminal experiences. target_q is batch x J.
std::vector<double> td_targets(std::span<const Experience> batch, std::span<const double> target_q, int num_bs,
                               double gamma);

struct IterationStats {
  int steps = 0;
  int updates = 0;
  double mean_loss = 0.0;
};

/// Online network, target network, optimizer state, replay and RNG of one
/// training run.
class Learner {
 public:
  Learner(const TrainConfig& cfg, const ProcessConfig& pcfg, const Trace& reference_trace);
  Learner(const Learner&) = delete;
  Learner& operator=(const Learner&) = delete;

  const nn::Network& network() const { return net_; }
  const nn::Params& params() const { return params_; }
  const nn::Params& target_params() const { return target_; }
  const ReplayBuffer& replay() const { return replay_; }
  const std::vector<int>& cameras() const { return cameras_; }
  long long total_steps() const { return total_steps_; }
  /// Environment steps at which the target network was synchronised.
  const std::vector<long long>& target_syncs() const { return syncs_; }

  /// One epsilon-greedy pass over the training trace from initial_state.
  IterationStats run_iteration(const Trace& train, int iteration);

  /// Hook called after every environment step (for invariants in tests).
  std::function<void(const Experience&)> on_step;

 private:
  double update(const Trace& train);  // returns the minibatch loss
  void bind_trace(const Trace& train);
  void init_output_bias(const Trace& train);
  std::size_t cache_key(int epoch, int bs, int counter) const;

  TrainConfig cfg_;
  ProcessConfig pcfg_;
  std::vector<int> cameras_;
  nn::Network net_;
  nn::Params params_;
  nn::Params target_;
  nn::OptimizerState opt_;
  ReplayBuffer replay_;
  std::mt19937_64 rng_;
  long long total_steps_ = 0;
  std::vector<long long> syncs_;
  std::vector<double> grad_;

  // Target-network Q values by (epoch, j, c) of the bound training trace,
  // valid while stamp == generation_ (bumped at every target sync).
  std::optional<Trace> bound_;
  std::vector<double> tq_cache_;
  std::vector<std::uint32_t> tq_stamp_;
  std::uint32_t generation_ = 1;
};

/// Greedy rollout with the given network. Forced steps skip the forward pass.
PolicyLog evaluate_policy(const nn::Network& net, const nn::Params& params, const Trace& trace,
                          const ProcessConfig& pcfg, const std::vector<int>& cameras);
Policy greedy_policy(const nn::Network& net, const nn::Params& params, const ProcessConfig& pcfg,
                     const std::vector<int>& cameras);

struct HistoryRow {
  int iteration = 0;
  double epsilon = 0.0;
  double eval_avg_bps = 0.0;
};

struct TrainResult {
  nn::Checkpoint best;
  int best_iteration = 0;
  double best_eval_avg_bps = 0.0;
  std::vector<HistoryRow> history;
};

using ProgressFn = std::function<void(const HistoryRow&, const IterationStats&)>;

/// Learn on epochs 1..boundary, evaluate on the rest after every iteration,
/// keep the parameters with the highest evaluation average (earliest on ties).
TrainResult train(const Trace& trace, const SplitSpec& split, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

/// Checkpoint metadata describing what the network expects as input.
nlohmann::json checkpoint_metadata(const Trace& trace, const ProcessConfig& pcfg, const std::vector<int>& cameras);

}  // namespace camho
