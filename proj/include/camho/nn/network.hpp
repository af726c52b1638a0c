#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "camho/nn/arch.hpp"
#include "camho/trace.hpp"

namespace camho::nn {

/// Image given as deviations from a uniform background, one list per
/// channel, plus the side-feature vector. Depth frames are mostly far
/// background, so the first layer only touches the listed pixels.
struct SparseInput {
  std::vector<std::span<const PixelDelta>> channels;
  std::span<const double> side;
  double background = 1.0;
};

/// Dense (N*I) x H x W image in [0,1] plus side features.
struct StateEncoding {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> image;  // channel-major, then row-major
  std::vector<double> side;
};

/// Owning sparse copy of a dense encoding.
struct SparseEncoding {
  std::vector<std::vector<PixelDelta>> channels;
  std::vector<double> side;
  double background = 1.0;

  SparseInput view() const;
};

SparseEncoding sparsify(const StateEncoding& enc, double background = 1.0);

class Network;

/// Parameters plus the transposed weight copies the kernels read. Build one
/// per parameter version; it references (does not copy) the parameters.
class PreparedParams {
 public:
  PreparedParams(const Network& net, const Params& params);

 private:
  friend class Network;
  const Params* params_;
  std::vector<std::vector<double>> conv_fwd_;   // conv0: [c][u][v][f]; others: [u][v][c][f]
  std::vector<std::vector<double>> conv_bwd_;   // [u][v][f][c] (unused for conv0)
  std::vector<double> conv0_kernel_sum_;        // sum of conv0 weights per filter
  std::vector<std::vector<double>> dense_fwd_;  // [in][out]; first layer input is HWC-ordered
  std::vector<std::vector<double>> dense_bwd_;  // [out][in], same input order
};

/// Returns the item loss and writes dLoss/dq into the second span.
using UpstreamFn = std::function<double(int item, std::span<const double> q, std::span<double> dq)>;

/// Optimised forward/backward kernels. Batched calls fan out over a fixed
/// number of chunks with OpenMP and reduce in chunk order, so results do
/// not depend on the thread count.
class Network {
 public:
  static constexpr int kGradientChunks = 4;

  explicit Network(ArchSpec arch);

  const Layout& layout() const { return layout_; }
  const ArchSpec& arch() const { return layout_.arch(); }
  std::size_t parameter_count() const { return layout_.parameter_count(); }

  std::vector<double> forward(const Params& params, const SparseInput& x) const;
  std::vector<double> forward(const PreparedParams& prepared, const SparseInput& x) const;
  /// out is items x outputs, row-major.
  void forward_batch(const PreparedParams& prepared, std::span<const SparseInput> xs,
                     std::span<double> out) const;

  /// grad += d(upstream . q)/dparams for one input.
  void backward(const Params& params, const SparseInput& x, std::span<const double> upstream,
                std::span<double> grad) const;

  /// grad = sum over items of d(loss_item)/dparams; returns the summed loss.
  double gradient_batch(const PreparedParams& prepared, std::span<const SparseInput> xs,
                        const UpstreamFn& upstream, std::span<double> grad) const;

  /// ReLU on/off bits of every hidden unit, for kink detection.
  std::vector<std::uint8_t> relu_pattern(const Params& params, const SparseInput& x) const;

  struct Workspace;
  struct Accumulator;

 private:
  void check_input(const SparseInput& x) const;
  void forward_item(const PreparedParams& p, const SparseInput& x, Workspace& ws) const;
  void backward_item(const PreparedParams& p, const SparseInput& x, Workspace& ws,
                     std::span<const double> dq, Accumulator& acc) const;
  void finalize(const Accumulator& acc, std::span<double> grad) const;

  Layout layout_;
  // First conv layer: for input pixel k, taps_[tap_start_[k] .. tap_start_[k+1])
  // list every (output position, kernel offset u*K+v) it feeds.
  struct Tap {
    std::uint32_t pos;
    std::uint32_t uv;
  };
  std::vector<std::uint32_t> tap_start_;
  std::vector<Tap> taps_;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  int coordinates_checked = 0;
  int coordinates_skipped = 0;  // perturbation crossed a ReLU kink
};

using BackwardFn = std::function<void(const Params&, const SparseInput&, std::span<const double>,
                                      std::span<double>)>;

/// Compares an analytic gradient of L = upstream . q against central
/// differences on a random parameter subset, sampling every block.
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const Network& net, const Params& params, const SparseInput& x,
                           std::span<const double> upstream, std::uint64_t seed, int coordinates = 256,
                           double step = 1e-3, const BackwardFn& backward = {});

}  // namespace camho::nn
