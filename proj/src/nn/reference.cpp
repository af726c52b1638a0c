#include "camho/nn/reference.hpp"

#include "camho/error.hpp"

namespace camho::nn::reference {

namespace {

struct Activations {
  std::vector<std::vector<double>> conv;  // post-ReLU, CHW
  std::vector<std::vector<double>> h;     // dense inputs, then q
};

void check(const Layout& layout, const Params& params, const StateEncoding& x) {
  const auto& a = layout.arch();
  if (params.size() != layout.parameter_count()) throw ConfigError("reference: parameter count mismatch");
  if (x.channels != a.in_channels || x.height != a.in_height || x.width != a.in_width ||
      x.image.size() != layout.image_size() || static_cast<int>(x.side.size()) != a.side_features)
    throw ConfigError("reference: input shape mismatch");
}

Activations run(const Layout& layout, const Params& params, const StateEncoding& x) {
  Activations act;
  const std::vector<double>* in = &x.image;
  for (const auto& g : layout.convs()) {
    std::vector<double> out(static_cast<std::size_t>(g.out_c) * g.out_h * g.out_w);
    for (int f = 0; f < g.out_c; ++f)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          double s = params[g.b_off + f];
          for (int c = 0; c < g.in_c; ++c)
            for (int u = 0; u < g.kernel; ++u)
              for (int v = 0; v < g.kernel; ++v) {
                const int y = oy * g.stride + u, xx = ox * g.stride + v;
                s += params[g.w_off + ((static_cast<std::size_t>(f) * g.in_c + c) * g.kernel + u) * g.kernel + v] *
                     (*in)[(static_cast<std::size_t>(c) * g.in_h + y) * g.in_w + xx];
              }
          out[(static_cast<std::size_t>(f) * g.out_h + oy) * g.out_w + ox] = s > 0.0 ? s : 0.0;
        }
    act.conv.push_back(std::move(out));
    in = &act.conv.back();
  }
  std::vector<double> h(*in);
  h.insert(h.end(), x.side.begin(), x.side.end());
  act.h.push_back(std::move(h));
  for (const auto& g : layout.denses()) {
    const auto& hin = act.h.back();
    std::vector<double> out(g.out);
    for (int o = 0; o < g.out; ++o) {
      double s = params[g.b_off + o];
      for (int i = 0; i < g.in; ++i) s += params[g.w_off + static_cast<std::size_t>(o) * g.in + i] * hin[i];
      out[o] = g.relu && s <= 0.0 ? 0.0 : s;
    }
    act.h.push_back(std::move(out));
  }
  return act;
}

}  // namespace

std::vector<double> forward(const Layout& layout, const Params& params, const StateEncoding& x) {
  check(layout, params, x);
  return run(layout, params, x).h.back();
}

void backward(const Layout& layout, const Params& params, const StateEncoding& x,
              std::span<const double> upstream, std::span<double> grad) {
  check(layout, params, x);
  if (static_cast<int>(upstream.size()) != layout.arch().outputs || grad.size() != params.size())
    throw ConfigError("reference: gradient shape mismatch");
  const Activations act = run(layout, params, x);
  const auto& denses = layout.denses();
  std::vector<double> dz(upstream.begin(), upstream.end());
  for (std::size_t l = denses.size(); l-- > 0;) {
    const auto& g = denses[l];
    const auto& hin = act.h[l];
    std::vector<double> dh(g.in, 0.0);
    for (int o = 0; o < g.out; ++o) {
      grad[g.b_off + o] += dz[o];
      for (int i = 0; i < g.in; ++i) {
        grad[g.w_off + static_cast<std::size_t>(o) * g.in + i] += dz[o] * hin[i];
        dh[i] += params[g.w_off + static_cast<std::size_t>(o) * g.in + i] * dz[o];
      }
    }
    // Inputs of dense l > 0 and the conv part of dense 0 are ReLU outputs.
    const std::size_t relu_in = l > 0 ? static_cast<std::size_t>(g.in) : layout.conv_features();
    const bool has_relu_input = l > 0 || !layout.convs().empty();
    if (has_relu_input)
      for (std::size_t i = 0; i < relu_in; ++i)
        if (hin[i] <= 0.0) dh[i] = 0.0;
    dz = std::move(dh);
  }
  const auto& convs = layout.convs();
  dz.resize(layout.conv_features());
  for (std::size_t l = convs.size(); l-- > 0;) {
    const auto& g = convs[l];
    const std::vector<double>& in = l == 0 ? x.image : act.conv[l - 1];
    std::vector<double> din(in.size(), 0.0);
    for (int f = 0; f < g.out_c; ++f)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          const double d = dz[(static_cast<std::size_t>(f) * g.out_h + oy) * g.out_w + ox];
          grad[g.b_off + f] += d;
          for (int c = 0; c < g.in_c; ++c)
            for (int u = 0; u < g.kernel; ++u)
              for (int v = 0; v < g.kernel; ++v) {
                const std::size_t wi = g.w_off + ((static_cast<std::size_t>(f) * g.in_c + c) * g.kernel + u) * g.kernel + v;
                const std::size_t ii = (static_cast<std::size_t>(c) * g.in_h + oy * g.stride + u) * g.in_w + ox * g.stride + v;
                grad[wi] += d * in[ii];
                din[ii] += params[wi] * d;
              }
        }
    if (l > 0)
      for (std::size_t i = 0; i < in.size(); ++i)
        if (in[i] <= 0.0) din[i] = 0.0;
    dz = std::move(din);
  }
}

StateEncoding densify(const Layout& layout, const SparseInput& x) {
  const auto& a = layout.arch();
  StateEncoding e;
  e.channels = a.in_channels;
  e.height = a.in_height;
  e.width = a.in_width;
  e.image.assign(layout.image_size(), x.background);
  const std::size_t plane = static_cast<std::size_t>(a.in_height) * a.in_width;
  if (static_cast<int>(x.channels.size()) != a.in_channels) throw ConfigError("reference: channel count mismatch");
  for (std::size_t c = 0; c < x.channels.size(); ++c)
    for (const auto& d : x.channels[c]) e.image.at(c * plane + d.index) = x.background + d.delta;
  e.side.assign(x.side.begin(), x.side.end());
  return e;
}

}  // namespace camho::nn::reference
