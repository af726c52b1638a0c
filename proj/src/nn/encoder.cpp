#include "camho/nn/encoder.hpp"

#include <algorithm>

#include "camho/error.hpp"

namespace camho::nn {

std::vector<int> all_cameras(const ProcessConfig& cfg) {
  std::vector<int> c(cfg.num_cameras);
  for (int i = 0; i < cfg.num_cameras; ++i) c[i] = i + 1;
  return c;
}

int encoded_channels(const std::vector<int>& cameras, const ProcessConfig& cfg) {
  return static_cast<int>(cameras.size()) * cfg.stack_depth;
}

int side_feature_count(const ProcessConfig& cfg) { return cfg.num_bs + 1; }

void side_features(int assoc_bs, int disrupt_counter, const ProcessConfig& cfg, std::span<double> out) {
  if (static_cast<int>(out.size()) != side_feature_count(cfg)) throw InvalidArgument("side_features: wrong length");
  std::fill(out.begin(), out.end(), 0.0);
  out[assoc_bs - 1] = 1.0;
  out[cfg.num_bs] = static_cast<double>(disrupt_counter) / std::max(1, cfg.disruption_epochs());
}

namespace {

void check_cameras(const std::vector<int>& cameras, const ProcessConfig& cfg) {
  if (cameras.empty()) throw InvalidArgument("encoder: no cameras selected");
  for (int c : cameras)
    if (c < 1 || c > cfg.num_cameras) throw InvalidArgument("encoder: camera " + std::to_string(c) + " out of range");
}

}  // namespace

StateEncoding encode_state(const DecisionState& s, const Trace& trace, const ProcessConfig& cfg,
                           const std::vector<int>& cameras) {
  validate_state(s, cfg);
  check_cameras(cameras, cfg);
  StateEncoding e;
  e.channels = encoded_channels(cameras, cfg);
  e.height = trace.frame_height();
  e.width = trace.frame_width();
  e.image.reserve(static_cast<std::size_t>(e.channels) * e.height * e.width);
  for (int cam : cameras)
    for (const auto& frame : stacked_frames(s, trace, cfg, cam)) e.image.insert(e.image.end(), frame.begin(), frame.end());
  e.side.resize(side_feature_count(cfg));
  side_features(s.assoc_bs, s.disrupt_counter, cfg, e.side);
  return e;
}

SparseInput SparseState::view() const {
  SparseInput x;
  x.channels = channels;
  x.side = std::span<const double>(side.data(), side_len);
  return x;
}

SparseState encode_sparse(const DecisionState& s, const Trace& trace, const ProcessConfig& cfg,
                          const std::vector<int>& cameras) {
  validate_state(s, cfg);
  check_cameras(cameras, cfg);
  if (s.epoch < cfg.stack_depth || s.epoch > trace.length())
    throw InvalidArgument("encode_sparse: epoch " + std::to_string(s.epoch) + " has no full frame stack");
  SparseState st;
  st.channels.reserve(encoded_channels(cameras, cfg));
  for (int cam : cameras)
    for (int k = 0; k < cfg.stack_depth; ++k) st.channels.push_back(trace.frame_deviations(cam, s.epoch - k));
  st.side_len = side_feature_count(cfg);
  side_features(s.assoc_bs, s.disrupt_counter, cfg, std::span<double>(st.side.data(), st.side_len));
  return st;
}

ArchSpec q_arch_for(const Trace& trace, const ProcessConfig& cfg, const std::vector<int>& cameras) {
  return ArchSpec::default_q(encoded_channels(cameras, cfg), trace.frame_height(), trace.frame_width(),
                             side_feature_count(cfg), cfg.num_bs);
}

}  // namespace camho::nn
