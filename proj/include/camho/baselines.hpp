#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "camho/process.hpp"
#include "camho/trace.hpp"

namespace camho {

struct PolicyStep {
  int t = 0;  // decision epoch (segment-local)
  int j = 1;
  int c = 0;
  int action = 1;
  double reward_bps = 0.0;  // reward received at t + 1
};

struct PolicyLog {
  std::vector<PolicyStep> steps;
  double average_bps = 0.0;
  int handovers = 0;
};

/// Mean with right-to-left summation, the same association the DP oracle
/// uses, so equal reward sequences give bit-equal averages.
double time_average(std::span<const double> rewards);
/// Recompute average and handover count from the steps.
void summarize(PolicyLog& log);
/// Average of the rewards for epochs [t0, t1] (decision epochs, inclusive).
double window_average(const PolicyLog& log, int t0, int t1);

using Policy = std::function<int(const DecisionState&, const Trace&)>;

/// Drive the decision process from initial_state to the terminal epoch.
PolicyLog rollout(const Trace& trace, const ProcessConfig& cfg, const Policy& policy);

Policy static_policy(int bs);
/// Switch to the strongest BS when it beats the current one by more than
/// hysteresis_db; never during disruption.
int reactive_policy(std::span<const PowerDbm> powers, int assoc_bs, int disrupt_counter,
                    double hysteresis_db);
Policy reactive_policy(double hysteresis_db);

/// Optimal value-to-go V_t(j, c) and action for t = N..horizon.
class OracleTable {
 public:
  OracleTable(int first_epoch, int last_epoch, int num_bs, int counter_levels);

  int first_epoch() const { return first_; }
  int last_epoch() const { return last_; }
  int rows() const { return last_ - first_ + 1; }
  int num_bs() const { return num_bs_; }
  int counter_levels() const { return levels_; }

  double& value(int t, int j, int c) { return value_[index(t, j, c)]; }
  double value(int t, int j, int c) const { return value_[index(t, j, c)]; }
  int& action(int t, int j, int c) { return action_[index(t, j, c)]; }
  int action(int t, int j, int c) const { return action_[index(t, j, c)]; }

 private:
  std::size_t index(int t, int j, int c) const;

  int first_, last_, num_bs_, levels_;
  std::vector<double> value_;
  std::vector<int> action_;
};

struct OracleResult {
  OracleTable table;
  PolicyLog log;
  double total_bps = 0.0;  // undiscounted sum of rewards
  double average_bps = 0.0;
};

/// Backward induction (gamma = 1) over a known capacity trace.
/// capacities[j-1][t-1] is BS j's capacity at epoch t.
/// Ties prefer staying, then the lowest BS index.
OracleResult dp_oracle(const std::vector<std::vector<double>>& capacities, const ProcessConfig& cfg,
                       int horizon);
OracleResult dp_oracle(const Trace& trace, const ProcessConfig& cfg);

/// Max |V_t - max_a (r + V_{t+1})| over the table; 0 for a consistent table.
double bellman_residual(const OracleTable& table, const std::vector<std::vector<double>>& capacities,
                        const ProcessConfig& cfg);

/// CSV with header t,j,c,action,reward_bps[,capacity_bs<k>_bps...].
void write_policy_csv(const PolicyLog& log, const std::filesystem::path& path,
                      const Trace* trace = nullptr);

}  // namespace camho
