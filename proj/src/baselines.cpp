#include "camho/baselines.hpp"

#include <fstream>
#include <string>

#include "camho/error.hpp"

namespace camho {

double time_average(std::span<const double> rewards) {
  if (rewards.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) acc = rewards[k] + acc;
  return acc / static_cast<double>(rewards.size());
}

void summarize(PolicyLog& log) {
  std::vector<double> rewards;
  rewards.reserve(log.steps.size());
  log.handovers = 0;
  for (const auto& s : log.steps) {
    rewards.push_back(s.reward_bps);
    if (s.c == 0 && s.action != s.j) ++log.handovers;
  }
  log.average_bps = time_average(rewards);
}

double window_average(const PolicyLog& log, int t0, int t1) {
  std::vector<double> rewards;
  for (const auto& s : log.steps)
    if (s.t >= t0 && s.t <= t1) rewards.push_back(s.reward_bps);
  return time_average(rewards);
}

PolicyLog rollout(const Trace& trace, const ProcessConfig& cfg, const Policy& policy) {
  PolicyLog log;
  DecisionState s = initial_state(trace, cfg);
  log.steps.reserve(trace.length() - cfg.stack_depth);
  while (s.epoch < trace.length()) {
    const int a = policy(s, trace);
    const auto out = step(s, a, trace, cfg);
    log.steps.push_back({s.epoch, s.assoc_bs, s.disrupt_counter, a, out.reward});
    s = out.next_state;
  }
  summarize(log);
  return log;
}

Policy static_policy(int bs) {
  if (bs < 1) throw InvalidArgument("static policy: BS index must be >= 1");
  return [bs](const DecisionState& s, const Trace& trace) {
    if (bs > trace.num_bs()) throw InvalidArgument("static policy: BS index out of range");
    return s.disrupt_counter == 0 ? bs : s.assoc_bs;
  };
}

int reactive_policy(std::span<const PowerDbm> powers, int assoc_bs, int disrupt_counter,
                    double hysteresis_db) {
  if (disrupt_counter != 0) return assoc_bs;
  int best = 1;
  for (int j = 2; j <= static_cast<int>(powers.size()); ++j)
    if (powers[j - 1].value > powers[best - 1].value) best = j;
  if (best == assoc_bs) return assoc_bs;
  const double current = powers[assoc_bs - 1].value;
  return powers[best - 1].value > current + hysteresis_db ? best : assoc_bs;
}

Policy reactive_policy(double hysteresis_db) {
  return [hysteresis_db](const DecisionState& s, const Trace& trace) {
    std::vector<PowerDbm> powers(trace.num_bs());
    for (int j = 1; j <= trace.num_bs(); ++j) powers[j - 1] = trace.power(j, s.epoch);
    return reactive_policy(powers, s.assoc_bs, s.disrupt_counter, hysteresis_db);
  };
}

OracleTable::OracleTable(int first_epoch, int last_epoch, int num_bs, int counter_levels)
    : first_(first_epoch), last_(last_epoch), num_bs_(num_bs), levels_(counter_levels) {
  const auto n = static_cast<std::size_t>(std::max(0, rows())) * num_bs_ * levels_;
  value_.assign(n, 0.0);
  action_.assign(n, 0);
}

std::size_t OracleTable::index(int t, int j, int c) const {
  return (static_cast<std::size_t>(t - first_) * num_bs_ + (j - 1)) * levels_ + c;
}

namespace {

// Preference order: stay first, then ascending index.
template <class F>
void for_each_candidate(int j, int c, int J, F&& f) {
  f(j);
  if (c != 0) return;
  for (int a = 1; a <= J; ++a)
    if (a != j) f(a);
}

}  // namespace

OracleResult dp_oracle(const std::vector<std::vector<double>>& capacities, const ProcessConfig& cfg,
                       int horizon) {
  cfg.validate();
  if (static_cast<int>(capacities.size()) != cfg.num_bs)
    throw InvalidArgument("dp_oracle: expected one capacity series per BS");
  for (const auto& series : capacities)
    if (series.size() != capacities.front().size())
      throw InvalidArgument("dp_oracle: capacity series have mismatched lengths");
  if (horizon > static_cast<int>(capacities.front().size()) || horizon < cfg.stack_depth)
    throw InvalidArgument("dp_oracle: horizon must lie in [N, series length]");

  const int N = cfg.stack_depth;
  const int J = cfg.num_bs;
  const int levels = cfg.disruption_epochs() + 1;
  OracleTable table(N, horizon, J, levels);
  auto cap = [&](int bs, int t) { return capacities[bs - 1][t - 1]; };

  for (int j = 1; j <= J; ++j)
    for (int c = 0; c < levels; ++c) {
      table.value(horizon, j, c) = 0.0;
      table.action(horizon, j, c) = j;
    }
  for (int t = horizon - 1; t >= N; --t) {
    for (int j = 1; j <= J; ++j) {
      for (int c = 0; c < levels; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        int best_a = j;
        for_each_candidate(j, c, J, [&](int a) {
          const int c2 = next_counter(c, a, j, cfg);
          const double q = reward(c2, cap(a, t + 1)) + table.value(t + 1, a, c2);
          if (q > best) {
            best = q;
            best_a = a;
          }
        });
        table.value(t, j, c) = best;
        table.action(t, j, c) = best_a;
      }
    }
  }

  PolicyLog log;
  int j = 1, c = 0;
  for (int t = N; t < horizon; ++t) {
    const int a = table.action(t, j, c);
    const int c2 = next_counter(c, a, j, cfg);
    log.steps.push_back({t, j, c, a, reward(c2, cap(a, t + 1))});
    j = a;
    c = c2;
  }
  summarize(log);

  OracleResult result{std::move(table), std::move(log)};
  result.total_bps = result.table.value(N, 1, 0);
  const int steps = horizon - N;
  result.average_bps = steps > 0 ? result.total_bps / steps : 0.0;
  return result;
}

OracleResult dp_oracle(const Trace& trace, const ProcessConfig& cfg) {
  std::vector<std::vector<double>> caps;
  for (int j = 1; j <= trace.num_bs(); ++j) {
    const auto s = trace.capacity_series(j);
    caps.emplace_back(s.begin(), s.end());
  }
  return dp_oracle(caps, cfg, trace.length());
}

double bellman_residual(const OracleTable& table, const std::vector<std::vector<double>>& capacities,
                        const ProcessConfig& cfg) {
  double worst = 0.0;
  const int J = table.num_bs();
  for (int t = table.first_epoch(); t < table.last_epoch(); ++t)
    for (int j = 1; j <= J; ++j)
      for (int c = 0; c < table.counter_levels(); ++c) {
        double best = -std::numeric_limits<double>::infinity();
        for_each_candidate(j, c, J, [&](int a) {
          const int c2 = next_counter(c, a, j, cfg);
          best = std::max(best, reward(c2, capacities[a - 1][t]) + table.value(t + 1, a, c2));
        });
        worst = std::max(worst, std::abs(best - table.value(t, j, c)));
      }
  return worst;
}

void write_policy_csv(const PolicyLog& log, const std::filesystem::path& path, const Trace* trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "t,j,c,action,reward_bps";
  if (trace)
    for (int k = 1; k <= trace->num_bs(); ++k) out << ",capacity_bs" << k << "_bps";
  out << "\n";
  for (const auto& s : log.steps) {
    out << s.t << ',' << s.j << ',' << s.c << ',' << s.action << ',' << format_double(s.reward_bps);
    if (trace)
      for (int k = 1; k <= trace->num_bs(); ++k) out << ',' << format_double(trace->capacity(k, s.t + 1));
    out << "\n";
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace camho
