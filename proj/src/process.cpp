#include "camho/process.hpp"

#include <string>

#include "camho/error.hpp"

namespace camho {

void ProcessConfig::validate() const {
  if (num_cameras < 1) throw InvalidArgument("process: num_cameras must be >= 1");
  if (num_bs < 2) throw InvalidArgument("process: num_bs must be >= 2");
  if (num_bs > 32) throw InvalidArgument("process: num_bs must be <= 32");
  if (stack_depth < 1) throw InvalidArgument("process: stack_depth must be >= 1");
  if (epoch_interval_ms <= 0) throw InvalidArgument("process: epoch_interval_ms must be > 0");
  if (disruption_ms < 0) throw InvalidArgument("process: disruption_ms must be >= 0");
}

void validate_state(const DecisionState& s, const ProcessConfig& cfg) {
  if (s.assoc_bs < 1 || s.assoc_bs > cfg.num_bs)
    throw InvalidArgument("state: associated BS " + std::to_string(s.assoc_bs) + " out of range");
  if (s.disrupt_counter < 0 || s.disrupt_counter > cfg.disruption_epochs())
    throw InvalidArgument("state: disruption counter " + std::to_string(s.disrupt_counter) +
                          " out of range");
  if (s.epoch < cfg.stack_depth)
    throw InvalidArgument("state: epoch precedes a full frame stack");
}

std::vector<int> action_set(const DecisionState& s, const ProcessConfig& cfg) {
  if (s.disrupt_counter != 0) return {s.assoc_bs};
  std::vector<int> all(cfg.num_bs);
  for (int j = 1; j <= cfg.num_bs; ++j) all[j - 1] = j;
  return all;
}

unsigned action_mask(int assoc_bs, int disrupt_counter, const ProcessConfig& cfg) {
  if (disrupt_counter != 0) return 1u << (assoc_bs - 1);
  return cfg.num_bs == 32 ? ~0u : (1u << cfg.num_bs) - 1u;
}

bool action_allowed(const DecisionState& s, int action, const ProcessConfig& cfg) {
  if (action < 1 || action > cfg.num_bs) return false;
  return s.disrupt_counter == 0 || action == s.assoc_bs;
}

int next_assoc(int action, const ProcessConfig& cfg) {
  if (action < 1 || action > cfg.num_bs)
    throw InvalidArgument("action " + std::to_string(action) + " outside 1.." +
                          std::to_string(cfg.num_bs));
  return action;
}

int next_counter(int counter, int action, int assoc_bs, const ProcessConfig& cfg) {
  if (counter != 0) {
    if (action != assoc_bs)
      throw ProtocolViolation("handover to BS " + std::to_string(action) +
                              " requested during service disruption");
    return counter - 1;
  }
  return action != assoc_bs ? cfg.disruption_epochs() : 0;
}

double reward(int next_counter, double capacity_next_bps) {
  if (capacity_next_bps < 0.0) throw InvalidArgument("reward: negative capacity");
  return next_counter == 0 ? capacity_next_bps : 0.0;
}

DecisionState initial_state(const Trace& trace, const ProcessConfig& cfg) {
  cfg.validate();
  if (trace.length() < cfg.stack_depth)
    throw InsufficientData("trace of length " + std::to_string(trace.length()) +
                           " cannot fill a stack of " + std::to_string(cfg.stack_depth) + " frames");
  return DecisionState{cfg.stack_depth, 1, 0};
}

StepOutcome step(const DecisionState& s, int action, const Trace& trace, const ProcessConfig& cfg) {
  if (!action_allowed(s, action, cfg)) {
    if (action < 1 || action > cfg.num_bs)
      throw ProtocolViolation("action " + std::to_string(action) + " is not a BS index");
    throw ProtocolViolation("action " + std::to_string(action) +
                            " outside the action set during disruption");
  }
  if (s.epoch >= trace.length())
    throw EndOfTrace("no epoch after " + std::to_string(s.epoch) + " in trace");

  StepOutcome out;
  out.next_state.epoch = s.epoch + 1;
  out.next_state.assoc_bs = next_assoc(action, cfg);
  out.next_state.disrupt_counter = next_counter(s.disrupt_counter, action, s.assoc_bs, cfg);
  out.reward = reward(out.next_state.disrupt_counter,
                      trace.capacity(out.next_state.assoc_bs, out.next_state.epoch));
  out.terminal = out.next_state.epoch == trace.length();
  return out;
}

std::vector<std::span<const float>> stacked_frames(const DecisionState& s, const Trace& trace,
                                                   const ProcessConfig& cfg, int camera) {
  std::vector<std::span<const float>> out;
  out.reserve(cfg.stack_depth);
  for (int k = 0; k < cfg.stack_depth; ++k) out.push_back(trace.frame(camera, s.epoch - k));
  return out;
}

}  // namespace camho
