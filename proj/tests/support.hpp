#pragma once

#include <functional>
#include <vector>

#include "camho/process.hpp"
#include "camho/trace.hpp"

namespace camho::test {

// Blank (all background) frames, constant budgets of 40 MHz / -173 dBm/Hz.
inline RawTrace blank_raw(int length, int cameras, const std::vector<std::vector<double>>& powers_dbm,
                          int width = 4, int height = 4) {
  RawTrace raw;
  raw.length = length;
  raw.frame_width = width;
  raw.frame_height = height;
  raw.frames.assign(cameras, std::vector<float>(static_cast<std::size_t>(length) * width * height, 1.0f));
  raw.powers_dbm = powers_dbm;
  raw.budgets.assign(powers_dbm.size(), LinkBudget{40e6, -173.0});
  raw.provenance = "test";
  return raw;
}

inline Trace blank_trace(int length, int cameras, const std::vector<std::vector<double>>& powers_dbm,
                         int width = 4, int height = 4) {
  return Trace::from_raw(blank_raw(length, cameras, powers_dbm, width, height));
}

struct BruteForce {
  double total = 0.0;
  std::vector<int> actions;
};

// Exhaustive search over legal action sequences, written against the rules
// directly rather than through the decision-process functions. Suffix sums
// accumulate right to left; among optimal continuations staying is preferred,
// then the lowest index.
inline BruteForce brute_force_oracle(const std::vector<std::vector<double>>& caps, int stack_depth,
                                     int disruption_epochs, int horizon) {
  const int J = static_cast<int>(caps.size());
  std::function<BruteForce(int, int, int)> best_from = [&](int t, int j, int c) -> BruteForce {
    if (t >= horizon) return {};
    BruteForce best;
    bool have = false;
    std::vector<int> order{j};
    if (c == 0)
      for (int a = 1; a <= J; ++a)
        if (a != j) order.push_back(a);
    for (int a : order) {
      int c2;
      if (c != 0)
        c2 = c - 1;
      else if (a != j)
        c2 = disruption_epochs;
      else
        c2 = 0;
      const double r = c2 == 0 ? caps[a - 1][t] : 0.0;  // capacity at epoch t + 1
      BruteForce tail = best_from(t + 1, a, c2);
      const double v = r + tail.total;
      if (!have || v > best.total) {
        have = true;
        best.total = v;
        best.actions = {a};
        best.actions.insert(best.actions.end(), tail.actions.begin(), tail.actions.end());
      }
    }
    return best;
  };
  return best_from(stack_depth, 1, 0);
}

}  // namespace camho::test
