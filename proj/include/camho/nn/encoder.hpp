#pragma once

#include <array>
#include <vector>

#include "camho/nn/network.hpp"
#include "camho/process.hpp"
#include "camho/trace.hpp"

namespace camho::nn {

/// Cameras that feed the encoder, 1-based. All cameras for the multi-camera
/// state, {1} for the single-camera one.
std::vector<int> all_cameras(const ProcessConfig& cfg);

int encoded_channels(const std::vector<int>& cameras, const ProcessConfig& cfg);
int side_feature_count(const ProcessConfig& cfg);

/// One-hot association (length J) followed by c / max(1, floor(T_dis/tau)).
void side_features(int assoc_bs, int disrupt_counter, const ProcessConfig& cfg, std::span<double> out);

/// Dense encoding. Channels are camera-major then recency: camera 1
/// newest .. oldest, camera 2 newest .. oldest, ...
StateEncoding encode_state(const DecisionState& s, const Trace& trace, const ProcessConfig& cfg,
                           const std::vector<int>& cameras);

/// The same state as a sparse view into the trace's frame deviations.
/// Holds spans into the trace, which must outlive it.
struct SparseState {
  std::vector<std::span<const PixelDelta>> channels;
  std::array<double, 33> side{};
  int side_len = 0;

  SparseInput view() const;
};

SparseState encode_sparse(const DecisionState& s, const Trace& trace, const ProcessConfig& cfg,
                          const std::vector<int>& cameras);

ArchSpec q_arch_for(const Trace& trace, const ProcessConfig& cfg, const std::vector<int>& cameras);

}  // namespace camho::nn
