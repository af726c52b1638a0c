#pragma once

#include <vector>

#include "camho/trace.hpp"

namespace camho {

/// Static parameters of the handover decision process. Times are integer
/// milliseconds so that the disruption length in epochs is exact.
struct ProcessConfig {
  int num_cameras = 2;
  int num_bs = 2;
  int stack_depth = 2;
  int epoch_interval_ms = 30;
  int disruption_ms = 0;

  void validate() const;
  /// floor(T_dis / tau).
  int disruption_epochs() const { return disruption_ms / epoch_interval_ms; }
};

/// State at decision epoch t of a trace segment. The frame stack is the
/// N most recent frames x_t .. x_{t-N+1} of every camera and is read from
/// the (immutable) trace rather than copied; see stacked_frames().
struct DecisionState {
  int epoch = 0;
  int assoc_bs = 1;
  int disrupt_counter = 0;

  bool operator==(const DecisionState&) const = default;
};

struct StepOutcome {
  DecisionState next_state;
  double reward = 0.0;  // bits per second
  bool terminal = false;
};

void validate_state(const DecisionState& s, const ProcessConfig& cfg);

/// Allowed BS indices: all of 1..J when c = 0, else only the associated BS.
std::vector<int> action_set(const DecisionState& s, const ProcessConfig& cfg);
/// Bit k-1 set when BS k is allowed.
unsigned action_mask(int assoc_bs, int disrupt_counter, const ProcessConfig& cfg);
bool action_allowed(const DecisionState& s, int action, const ProcessConfig& cfg);

int next_assoc(int action, const ProcessConfig& cfg);
int next_counter(int counter, int action, int assoc_bs, const ProcessConfig& cfg);
double reward(int next_counter, double capacity_next_bps);

DecisionState initial_state(const Trace& trace, const ProcessConfig& cfg);
StepOutcome step(const DecisionState& s, int action, const Trace& trace, const ProcessConfig& cfg);

/// Frames x_t, x_{t-1}, ..., x_{t-N+1} of one camera, newest first.
std::vector<std::span<const float>> stacked_frames(const DecisionState& s, const Trace& trace,
                                                   const ProcessConfig& cfg, int camera);

}  // namespace camho
