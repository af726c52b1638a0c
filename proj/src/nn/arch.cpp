#include "camho/nn/arch.hpp"

#include <cmath>
#include <random>

#include "camho/error.hpp"

namespace camho::nn {

ArchSpec ArchSpec::default_q(int channels, int height, int width, int side, int outputs) {
  ArchSpec a;
  a.in_channels = channels;
  a.in_height = height;
  a.in_width = width;
  a.side_features = side;
  a.convs = {{8, 8, 4}, {16, 4, 2}};
  a.hidden = {64};
  a.outputs = outputs;
  return a;
}

nlohmann::json arch_to_json(const ArchSpec& a) {
  nlohmann::json convs = nlohmann::json::array();
  for (const auto& c : a.convs) convs.push_back({{"filters", c.filters}, {"kernel", c.kernel}, {"stride", c.stride}});
  return {{"in_channels", a.in_channels}, {"in_height", a.in_height}, {"in_width", a.in_width},
          {"side_features", a.side_features}, {"convs", convs}, {"hidden", a.hidden},
          {"outputs", a.outputs}};
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  try {
    ArchSpec a;
    a.in_channels = j.at("in_channels").get<int>();
    a.in_height = j.at("in_height").get<int>();
    a.in_width = j.at("in_width").get<int>();
    a.side_features = j.at("side_features").get<int>();
    for (const auto& c : j.at("convs"))
      a.convs.push_back({c.at("filters").get<int>(), c.at("kernel").get<int>(), c.at("stride").get<int>()});
    a.hidden = j.at("hidden").get<std::vector<int>>();
    a.outputs = j.at("outputs").get<int>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("architecture descriptor: ") + e.what());
  }
}

Layout::Layout(ArchSpec arch) : arch_(std::move(arch)) {
  const auto& a = arch_;
  if (a.in_channels < 1 || a.in_height < 1 || a.in_width < 1 || a.side_features < 0 || a.outputs < 1)
    throw ConfigError("architecture: non-positive dimension");

  auto add_block = [&](std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    blocks_.push_back({std::move(name), std::move(shape), count_, n});
    count_ += n;
    return blocks_.back().offset;
  };

  int c = a.in_channels, h = a.in_height, w = a.in_width;
  for (std::size_t k = 0; k < a.convs.size(); ++k) {
    const auto& cs = a.convs[k];
    if (cs.filters < 1 || cs.kernel < 1 || cs.stride < 1 || cs.kernel > h || cs.kernel > w)
      throw ConfigError("architecture: conv layer " + std::to_string(k + 1) + " does not fit its input");
    ConvGeom g{};
    g.in_c = c;
    g.in_h = h;
    g.in_w = w;
    g.out_c = cs.filters;
    g.kernel = cs.kernel;
    g.stride = cs.stride;
    g.out_h = (h - cs.kernel) / cs.stride + 1;
    g.out_w = (w - cs.kernel) / cs.stride + 1;
    const std::string base = "conv" + std::to_string(k + 1);
    g.w_off = add_block(base + ".weight", {cs.filters, c, cs.kernel, cs.kernel});
    g.b_off = add_block(base + ".bias", {cs.filters});
    convs_.push_back(g);
    c = g.out_c;
    h = g.out_h;
    w = g.out_w;
  }
  conv_features_ = static_cast<std::size_t>(c) * h * w;

  int in = static_cast<int>(conv_features_) + a.side_features;
  std::vector<int> widths = a.hidden;
  widths.push_back(a.outputs);
  for (std::size_t k = 0; k < widths.size(); ++k) {
    if (widths[k] < 1) throw ConfigError("architecture: dense width must be >= 1");
    const bool last = k + 1 == widths.size();
    const std::string base = last ? "out" : "fc" + std::to_string(k + 1);
    DenseGeom g{};
    g.in = in;
    g.out = widths[k];
    g.relu = !last;
    g.w_off = add_block(base + ".weight", {g.out, g.in});
    g.b_off = add_block(base + ".bias", {g.out});
    denses_.push_back(g);
    in = g.out;
  }
}

namespace {

double unit_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Params init_params(const Layout& layout, std::uint64_t seed) {
  Params p(layout.parameter_count(), 0.0);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t off, std::size_t n, double bound) {
    for (std::size_t k = 0; k < n; ++k) p[off + k] = (2.0 * unit_real(rng) - 1.0) * bound;
  };
  for (const auto& g : layout.convs()) {
    const double fan_in = static_cast<double>(g.in_c) * g.kernel * g.kernel;
    fill(g.w_off, static_cast<std::size_t>(g.out_c) * g.in_c * g.kernel * g.kernel, std::sqrt(6.0 / fan_in));
  }
  for (const auto& g : layout.denses()) {
    const double bound = g.relu ? std::sqrt(6.0 / g.in) : 1.0 / std::sqrt(static_cast<double>(g.in));
    fill(g.w_off, static_cast<std::size_t>(g.out) * g.in, bound);
  }
  return p;
}

}  // namespace camho::nn
