#pragma once

#include <span>
#include <vector>

#include "camho/nn/arch.hpp"
#include "camho/nn/network.hpp"

namespace camho::nn::reference {

/// Straightforward dense, serial, channel-major implementation. Kept as the
/// yardstick for the optimised kernels in Network.
std::vector<double> forward(const Layout& layout, const Params& params, const StateEncoding& x);

/// grad += d(upstream . q)/dparams.
void backward(const Layout& layout, const Params& params, const StateEncoding& x,
              std::span<const double> upstream, std::span<double> grad);

/// Dense image of a sparse input.
StateEncoding densify(const Layout& layout, const SparseInput& x);

}  // namespace camho::nn::reference
