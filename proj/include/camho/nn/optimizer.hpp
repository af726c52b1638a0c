#pragma once

#include <span>
#include <string>
#include <vector>

#include "camho/nn/arch.hpp"

namespace camho::nn {

enum class OptimizerMode { rmsprop, sgd };

struct OptimizerConfig {
  OptimizerMode mode = OptimizerMode::rmsprop;
  double learning_rate = 2.5e-4;
  double decay = 0.95;    // running mean of squared gradients
  double epsilon = 1e-6;  // added to the root in the denominator
};

std::string to_string(OptimizerMode m);
OptimizerMode optimizer_mode_from_string(const std::string& s);

struct OptimizerState {
  std::vector<double> mean_square;
};

/// rmsprop: s = d s + (1-d) g^2;  w -= lr g / (sqrt(s) + eps)
/// sgd:     w -= lr g
void optimizer_step(Params& params, std::span<const double> grads, OptimizerState& state,
                    const OptimizerConfig& cfg);

}  // namespace camho::nn
