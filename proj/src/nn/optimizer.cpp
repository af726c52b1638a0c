#include "camho/nn/optimizer.hpp"

#include <cmath>

#include "camho/error.hpp"

namespace camho::nn {

std::string to_string(OptimizerMode m) { return m == OptimizerMode::rmsprop ? "rmsprop" : "sgd"; }

OptimizerMode optimizer_mode_from_string(const std::string& s) {
  if (s == "rmsprop") return OptimizerMode::rmsprop;
  if (s == "sgd") return OptimizerMode::sgd;
  throw ConfigError("optimizer: unknown mode '" + s + "' (expected rmsprop or sgd)");
}

void optimizer_step(Params& params, std::span<const double> grads, OptimizerState& state,
                    const OptimizerConfig& cfg) {
  if (grads.size() != params.size()) throw InvalidArgument("optimizer_step: gradient size mismatch");
  const std::size_t n = params.size();
  if (cfg.mode == OptimizerMode::sgd) {
    for (std::size_t k = 0; k < n; ++k) params[k] -= cfg.learning_rate * grads[k];
    return;
  }
  if (state.mean_square.empty()) state.mean_square.assign(n, 0.0);
  if (state.mean_square.size() != n) throw InvalidArgument("optimizer_step: state size mismatch");
  const double d = cfg.decay;
  for (std::size_t k = 0; k < n; ++k) {
    const double g = grads[k];
    double& s = state.mean_square[k];
    s = d * s + (1.0 - d) * g * g;
    params[k] -= cfg.learning_rate * g / (std::sqrt(s) + cfg.epsilon);
  }
}

}  // namespace camho::nn
