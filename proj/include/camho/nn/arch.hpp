#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace camho::nn {

struct ConvSpec {
  int filters = 8;
  int kernel = 8;
  int stride = 4;
  bool operator==(const ConvSpec&) const = default;
};

/// Conv stack (ReLU after each) on the image, flatten, append side features,
/// then dense hidden layers (ReLU) and a linear output layer.
struct ArchSpec {
  int in_channels = 4;
  int in_height = 40;
  int in_width = 40;
  int side_features = 3;
  std::vector<ConvSpec> convs;
  std::vector<int> hidden;
  int outputs = 2;

  /// conv 8x8/4 (8) -> conv 4x4/2 (16) -> dense 64 -> outputs.
  static ArchSpec default_q(int channels, int height, int width, int side, int outputs);
  bool operator==(const ArchSpec&) const = default;
};

nlohmann::json arch_to_json(const ArchSpec& a);
ArchSpec arch_from_json(const nlohmann::json& j);

struct BlockInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct ConvGeom {
  int in_c, in_h, in_w;
  int out_c, out_h, out_w;
  int kernel, stride;
  std::size_t w_off, b_off;  // weights [out_c][in_c][k][k], bias [out_c]
};

struct DenseGeom {
  int in, out;
  std::size_t w_off, b_off;  // weights [out][in], bias [out]
  bool relu;
};

/// Parameter layout derived from an architecture. All parameters live in
/// one flat array; blocks() names the slices.
class Layout {
 public:
  explicit Layout(ArchSpec arch);

  const ArchSpec& arch() const { return arch_; }
  const std::vector<BlockInfo>& blocks() const { return blocks_; }
  const std::vector<ConvGeom>& convs() const { return convs_; }
  const std::vector<DenseGeom>& denses() const { return denses_; }
  std::size_t parameter_count() const { return count_; }
  std::size_t image_size() const {
    return static_cast<std::size_t>(arch_.in_channels) * arch_.in_height * arch_.in_width;
  }
  /// Length of the flattened conv output (image size when there are no convs).
  std::size_t conv_features() const { return conv_features_; }

 private:
  ArchSpec arch_;
  std::vector<BlockInfo> blocks_;
  std::vector<ConvGeom> convs_;
  std::vector<DenseGeom> denses_;
  std::size_t count_ = 0;
  std::size_t conv_features_ = 0;
};

using Params = std::vector<double>;

/// He-uniform hidden layers, +-1/sqrt(fan_in) output layer, zero biases.
/// Uses its own integer -> real mapping so values do not depend on the
/// standard library's distribution implementation.
Params init_params(const Layout& layout, std::uint64_t seed);

}  // namespace camho::nn
