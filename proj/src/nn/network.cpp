#include "camho/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>

#include "camho/error.hpp"

namespace camho::nn {

SparseInput SparseEncoding::view() const {
  SparseInput x;
  x.channels.reserve(channels.size());
  for (const auto& c : channels) x.channels.emplace_back(c);
  x.side = side;
  x.background = background;
  return x;
}

SparseEncoding sparsify(const StateEncoding& enc, double background) {
  SparseEncoding s;
  s.background = background;
  s.side = enc.side;
  const std::size_t plane = static_cast<std::size_t>(enc.height) * enc.width;
  if (enc.image.size() != plane * enc.channels) throw ConfigError("encoding: image size does not match shape");
  s.channels.resize(enc.channels);
  for (int c = 0; c < enc.channels; ++c) {
    const double* img = enc.image.data() + c * plane;
    for (std::size_t k = 0; k < plane; ++k)
      if (img[k] != background) s.channels[c].push_back({static_cast<std::uint32_t>(k), img[k] - background});
  }
  return s;
}

namespace {

// Column of the canonical (channel-major) flatten for position i of the
// HWC-ordered first dense input.
std::size_t canonical_column(const Layout& layout, std::size_t i) {
  if (layout.convs().empty() || i >= layout.conv_features()) return i;
  const auto& g = layout.convs().back();
  const std::size_t c = i % g.out_c;
  const std::size_t pos = i / g.out_c;
  return c * g.out_h * g.out_w + pos;
}

struct Range {
  int lo, hi;  // inclusive
};

// Output rows (or columns) whose receptive field contains input row y.
Range covering(int y, int kernel, int stride, int out) {
  const int lo = y - kernel + 1 <= 0 ? 0 : (y - kernel + stride) / stride;
  const int hi = std::min(out - 1, y / stride);
  return {lo, hi};
}

// y += a * x. The layer widths are small and known only at run time, so
// common widths get a fixed-length loop the compiler can fully vectorise.
template <int N>
inline void axpy_fixed(double a, const double* __restrict x, double* __restrict y) {
  for (int k = 0; k < N; ++k) y[k] += a * x[k];
}

inline void axpy(int n, double a, const double* __restrict x, double* __restrict y) {
  switch (n) {
    case 2: return axpy_fixed<2>(a, x, y);
    case 4: return axpy_fixed<4>(a, x, y);
    case 8: return axpy_fixed<8>(a, x, y);
    case 16: return axpy_fixed<16>(a, x, y);
    case 32: return axpy_fixed<32>(a, x, y);
    case 64: return axpy_fixed<64>(a, x, y);
    default:
      for (int k = 0; k < n; ++k) y[k] += a * x[k];
  }
}

// y[0..m) += sum over k < n of x[k * xs] * A[k * lda + 0..m). Columns are
// processed in blocks whose accumulators stay in registers; zero x entries
// (inactive ReLU units) are skipped.
template <int B>
inline void gemv_block(int n, const double* x, std::size_t xs, const double* A, std::size_t lda, double* y) {
  double acc[B] = {};
  for (int k = 0; k < n; ++k) {
    const double a = x[k * xs];
    if (a == 0.0) continue;
    const double* r = A + k * lda;
    for (int j = 0; j < B; ++j) acc[j] += a * r[j];
  }
  for (int j = 0; j < B; ++j) y[j] += acc[j];
}

void gemv_t(int n, int m, const double* x, std::size_t xs, const double* A, std::size_t lda, double* y) {
  int j = 0;
  for (; j + 32 <= m; j += 32) gemv_block<32>(n, x, xs, A + j, lda, y + j);
  for (; j + 16 <= m; j += 16) gemv_block<16>(n, x, xs, A + j, lda, y + j);
  for (; j + 8 <= m; j += 8) gemv_block<8>(n, x, xs, A + j, lda, y + j);
  for (; j + 2 <= m; j += 2) gemv_block<2>(n, x, xs, A + j, lda, y + j);
  for (; j < m; ++j) gemv_block<1>(n, x, xs, A + j, lda, y + j);
}

void relu(std::vector<double>& v) {
  for (auto& a : v) a = a > 0.0 ? a : 0.0;
}

}  // namespace

PreparedParams::PreparedParams(const Network& net, const Params& params) : params_(&params) {
  const Layout& layout = net.layout();
  if (params.size() != layout.parameter_count())
    throw ConfigError("parameters: expected " + std::to_string(layout.parameter_count()) + " values, got " +
                      std::to_string(params.size()));
  const auto& convs = layout.convs();
  conv_fwd_.resize(convs.size());
  conv_bwd_.resize(convs.size());
  for (std::size_t l = 0; l < convs.size(); ++l) {
    const auto& g = convs[l];
    const int F = g.out_c, C = g.in_c, K = g.kernel;
    const double* w = params.data() + g.w_off;
    auto& fwd = conv_fwd_[l];
    fwd.resize(static_cast<std::size_t>(F) * C * K * K);
    if (l == 0) {
      conv0_kernel_sum_.assign(F, 0.0);
      for (int f = 0; f < F; ++f)
        for (int c = 0; c < C; ++c)
          for (int u = 0; u < K; ++u)
            for (int v = 0; v < K; ++v) {
              const double a = w[((f * C + c) * K + u) * K + v];
              fwd[((static_cast<std::size_t>(c) * K + u) * K + v) * F + f] = a;
              conv0_kernel_sum_[f] += a;
            }
    } else {
      auto& bwd = conv_bwd_[l];
      bwd.resize(fwd.size());
      for (int f = 0; f < F; ++f)
        for (int c = 0; c < C; ++c)
          for (int u = 0; u < K; ++u)
            for (int v = 0; v < K; ++v) {
              const double a = w[((f * C + c) * K + u) * K + v];
              fwd[((static_cast<std::size_t>(u) * K + v) * C + c) * F + f] = a;
              bwd[((static_cast<std::size_t>(f) * K + u) * K + v) * C + c] = a;
            }
    }
  }
  const auto& denses = layout.denses();
  dense_fwd_.resize(denses.size());
  dense_bwd_.resize(denses.size());
  for (std::size_t l = 0; l < denses.size(); ++l) {
    const auto& g = denses[l];
    auto& t = dense_fwd_[l];
    t.resize(static_cast<std::size_t>(g.in) * g.out);
    const double* w = params.data() + g.w_off;
    for (int i = 0; i < g.in; ++i) {
      const std::size_t col = l == 0 ? canonical_column(layout, i) : static_cast<std::size_t>(i);
      for (int o = 0; o < g.out; ++o) t[static_cast<std::size_t>(i) * g.out + o] = w[o * static_cast<std::size_t>(g.in) + col];
    }
    auto& b = dense_bwd_[l];
    b.resize(t.size());
    for (int o = 0; o < g.out; ++o)
      for (int i = 0; i < g.in; ++i) b[static_cast<std::size_t>(o) * g.in + i] = t[static_cast<std::size_t>(i) * g.out + o];
  }
}

struct Network::Workspace {
  std::vector<std::vector<double>> conv;  // post-ReLU, HWC
  std::vector<std::vector<double>> patch;  // patch[l]: im2col rows of conv l's input, l >= 1
  std::vector<std::vector<double>> h;      // h[l] = input of dense l; h.back() = q
  std::vector<double> dz, dh, dconv, dconv_next, dpatch;
};

struct Network::Accumulator {
  std::vector<std::vector<double>> conv_w;  // prepared layout
  std::vector<std::vector<double>> conv_b;
  std::vector<double> conv0_bg;  // background contribution, added to every weight of the filter
  std::vector<std::vector<double>> dense_w;  // [in][out]
  std::vector<std::vector<double>> dense_b;

  explicit Accumulator(const Layout& layout) {
    for (const auto& g : layout.convs()) {
      conv_w.emplace_back(static_cast<std::size_t>(g.out_c) * g.in_c * g.kernel * g.kernel, 0.0);
      conv_b.emplace_back(g.out_c, 0.0);
    }
    if (!layout.convs().empty()) conv0_bg.assign(layout.convs()[0].out_c, 0.0);
    for (const auto& g : layout.denses()) {
      dense_w.emplace_back(static_cast<std::size_t>(g.in) * g.out, 0.0);
      dense_b.emplace_back(g.out, 0.0);
    }
  }
};

Network::Network(ArchSpec arch) : layout_(std::move(arch)) {
  if (layout_.convs().empty()) return;
  const auto& g = layout_.convs()[0];
  const int K = g.kernel, S = g.stride;
  tap_start_.reserve(static_cast<std::size_t>(g.in_h) * g.in_w + 1);
  for (int y = 0; y < g.in_h; ++y)
    for (int x = 0; x < g.in_w; ++x) {
      tap_start_.push_back(static_cast<std::uint32_t>(taps_.size()));
      const Range ry = covering(y, K, S, g.out_h), rx = covering(x, K, S, g.out_w);
      for (int oy = ry.lo; oy <= ry.hi; ++oy)
        for (int ox = rx.lo; ox <= rx.hi; ++ox)
          taps_.push_back({static_cast<std::uint32_t>(oy * g.out_w + ox),
                           static_cast<std::uint32_t>((y - oy * S) * K + (x - ox * S))});
    }
  tap_start_.push_back(static_cast<std::uint32_t>(taps_.size()));
}

void Network::check_input(const SparseInput& x) const {
  const auto& a = arch();
  if (static_cast<int>(x.channels.size()) != a.in_channels)
    throw ConfigError("input: expected " + std::to_string(a.in_channels) + " image channels, got " +
                      std::to_string(x.channels.size()));
  if (static_cast<int>(x.side.size()) != a.side_features)
    throw ConfigError("input: expected " + std::to_string(a.side_features) + " side features, got " +
                      std::to_string(x.side.size()));
  const std::uint32_t plane = static_cast<std::uint32_t>(a.in_height) * a.in_width;
  for (const auto& ch : x.channels)
    for (const auto& d : ch)
      if (d.index >= plane) throw ConfigError("input: pixel index out of range");
}

void Network::forward_item(const PreparedParams& p, const SparseInput& x, Workspace& ws) const {
  const Params& params = *p.params_;
  const auto& convs = layout_.convs();
  const auto& denses = layout_.denses();
  const double bg = x.background;
  ws.conv.resize(convs.size());
  ws.h.resize(denses.size() + 1);

  if (!convs.empty()) {
    const auto& g = convs[0];
    const int F = g.out_c, K = g.kernel;
    auto& out = ws.conv[0];
    out.resize(static_cast<std::size_t>(g.out_h) * g.out_w * F);
    const double* b = params.data() + g.b_off;
    for (std::size_t pos = 0; pos < static_cast<std::size_t>(g.out_h) * g.out_w; ++pos)
      for (int f = 0; f < F; ++f) out[pos * F + f] = b[f] + bg * p.conv0_kernel_sum_[f];
    const double* wt = p.conv_fwd_[0].data();
    const std::size_t KK = static_cast<std::size_t>(K) * K;
    for (int c = 0; c < g.in_c; ++c) {
      const double* wc = wt + c * KK * F;
      for (const auto& dev : x.channels[c])
        for (std::uint32_t k = tap_start_[dev.index]; k < tap_start_[dev.index + 1]; ++k)
          axpy(F, dev.delta, wc + taps_[k].uv * F, out.data() + static_cast<std::size_t>(taps_[k].pos) * F);
    }
    relu(out);
  }

  ws.patch.resize(convs.size());
  for (std::size_t l = 1; l < convs.size(); ++l) {
    const auto& g = convs[l];
    const int F = g.out_c, C = g.in_c, K = g.kernel, S = g.stride;
    const std::size_t row = static_cast<std::size_t>(K) * C, plen = row * K;
    const std::size_t positions = static_cast<std::size_t>(g.out_h) * g.out_w;
    const auto& in = ws.conv[l - 1];
    auto& patch = ws.patch[l];
    auto& out = ws.conv[l];
    patch.resize(positions * plen);
    out.resize(positions * F);
    const double* b = params.data() + g.b_off;
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox) {
        const std::size_t pos = static_cast<std::size_t>(oy) * g.out_w + ox;
        double* pp = patch.data() + pos * plen;
        for (int u = 0; u < K; ++u)
          std::copy_n(in.data() + (static_cast<std::size_t>(oy * S + u) * g.in_w + ox * S) * C, row, pp + u * row);
        double* o = out.data() + pos * F;
        std::copy_n(b, F, o);
        gemv_t(static_cast<int>(plen), F, pp, 1, p.conv_fwd_[l].data(), F, o);
      }
    relu(out);
  }

  auto& h0 = ws.h[0];
  h0.resize(denses[0].in);
  if (!convs.empty()) {
    std::copy(ws.conv.back().begin(), ws.conv.back().end(), h0.begin());
  } else {
    const std::size_t plane = static_cast<std::size_t>(arch().in_height) * arch().in_width;
    std::fill(h0.begin(), h0.begin() + layout_.conv_features(), bg);
    for (std::size_t c = 0; c < x.channels.size(); ++c)
      for (const auto& dev : x.channels[c]) h0[c * plane + dev.index] += dev.delta;
  }
  std::copy(x.side.begin(), x.side.end(), h0.begin() + layout_.conv_features());

  for (std::size_t l = 0; l < denses.size(); ++l) {
    const auto& g = denses[l];
    const auto& in = ws.h[l];
    auto& out = ws.h[l + 1];
    out.assign(params.begin() + g.b_off, params.begin() + g.b_off + g.out);
    gemv_t(g.in, g.out, in.data(), 1, p.dense_fwd_[l].data(), g.out, out.data());
    if (g.relu) relu(out);
  }
}

void Network::backward_item(const PreparedParams& p, const SparseInput& x, Workspace& ws,
                            std::span<const double> dq, Accumulator& acc) const {
  const auto& convs = layout_.convs();
  const auto& denses = layout_.denses();
  const std::size_t cf = layout_.conv_features();

  ws.dz.assign(dq.begin(), dq.end());
  for (std::size_t l = denses.size(); l-- > 0;) {
    const auto& g = denses[l];
    const auto& in = ws.h[l];
    const double* dz = ws.dz.data();
    auto& gb = acc.dense_b[l];
    for (int o = 0; o < g.out; ++o) gb[o] += dz[o];
    double* gw = acc.dense_w[l].data();
    for (int i = 0; i < g.in; ++i) {
      const double a = in[i];
      if (a == 0.0) continue;
      double* row = gw + static_cast<std::size_t>(i) * g.out;
      axpy(g.out, a, dz, row);
    }
    if (l == 0 && convs.empty()) break;
    // Input gradient, restricted to units that were active (every input
    // here is a ReLU output except the side features, which need none).
    const int n_in = l == 0 ? static_cast<int>(cf) : g.in;
    ws.dh.assign(n_in, 0.0);
    gemv_t(g.out, n_in, dz, 1, p.dense_bwd_[l].data(), g.in, ws.dh.data());
    for (int i = 0; i < n_in; ++i)
      if (in[i] == 0.0) ws.dh[i] = 0.0;
    std::swap(ws.dz, ws.dh);
  }
  if (convs.empty()) return;

  ws.dconv.assign(ws.dz.begin(), ws.dz.begin() + cf);
  for (std::size_t l = convs.size(); l-- > 1;) {
    const auto& g = convs[l];
    const int F = g.out_c, C = g.in_c, K = g.kernel, S = g.stride;
    const std::size_t row = static_cast<std::size_t>(K) * C, plen = row * K;
    const int positions = g.out_h * g.out_w;
    const auto& in = ws.conv[l - 1];
    const auto& patch = ws.patch[l];
    const double* d = ws.dconv.data();
    auto& gb = acc.conv_b[l];
    for (int pos = 0; pos < positions; ++pos)
      for (int f = 0; f < F; ++f) gb[f] += d[pos * F + f];
    // Weight gradient row k (patch entry k) = sum over positions of patch * d.
    double* gw = acc.conv_w[l].data();
    for (std::size_t k = 0; k < plen; ++k) gemv_t(positions, F, patch.data() + k, plen, d, F, gw + k * F);
    // Input gradient: per position, the patch gradient W^T d scattered back.
    ws.dconv_next.assign(in.size(), 0.0);
    ws.dpatch.resize(plen);
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox) {
        const std::size_t pos = static_cast<std::size_t>(oy) * g.out_w + ox;
        std::fill(ws.dpatch.begin(), ws.dpatch.end(), 0.0);
        gemv_t(F, static_cast<int>(plen), d + pos * F, 1, p.conv_bwd_[l].data(), plen, ws.dpatch.data());
        for (int u = 0; u < K; ++u) {
          double* dst = ws.dconv_next.data() + (static_cast<std::size_t>(oy * S + u) * g.in_w + ox * S) * C;
          const double* src = ws.dpatch.data() + u * row;
          for (std::size_t k = 0; k < row; ++k) dst[k] += src[k];
        }
      }
    for (std::size_t k = 0; k < in.size(); ++k)
      if (in[k] == 0.0) ws.dconv_next[k] = 0.0;
    std::swap(ws.dconv, ws.dconv_next);
  }

  const auto& g = convs[0];
  const int F = g.out_c, K = g.kernel;
  const std::size_t positions = static_cast<std::size_t>(g.out_h) * g.out_w;
  auto& gb = acc.conv_b[0];
  for (std::size_t pos = 0; pos < positions; ++pos)
    for (int f = 0; f < F; ++f) {
      const double d = ws.dconv[pos * F + f];
      gb[f] += d;
      acc.conv0_bg[f] += x.background * d;
    }
  double* gw = acc.conv_w[0].data();
  const std::size_t KK = static_cast<std::size_t>(K) * K;
  for (int c = 0; c < g.in_c; ++c) {
    double* gc = gw + c * KK * F;
    for (const auto& dev : x.channels[c])
      for (std::uint32_t k = tap_start_[dev.index]; k < tap_start_[dev.index + 1]; ++k)
        axpy(F, dev.delta, ws.dconv.data() + static_cast<std::size_t>(taps_[k].pos) * F, gc + taps_[k].uv * F);
  }
}

void Network::finalize(const Accumulator& acc, std::span<double> grad) const {
  const auto& convs = layout_.convs();
  for (std::size_t l = 0; l < convs.size(); ++l) {
    const auto& g = convs[l];
    const int F = g.out_c, C = g.in_c, K = g.kernel;
    const auto& a = acc.conv_w[l];
    for (int f = 0; f < F; ++f) {
      for (int c = 0; c < C; ++c)
        for (int u = 0; u < K; ++u)
          for (int v = 0; v < K; ++v) {
            const std::size_t src = l == 0 ? ((static_cast<std::size_t>(c) * K + u) * K + v) * F + f
                                           : ((static_cast<std::size_t>(u) * K + v) * C + c) * F + f;
            double val = a[src];
            if (l == 0) val += acc.conv0_bg[f];
            grad[g.w_off + ((static_cast<std::size_t>(f) * C + c) * K + u) * K + v] += val;
          }
      grad[g.b_off + f] += acc.conv_b[l][f];
    }
  }
  const auto& denses = layout_.denses();
  for (std::size_t l = 0; l < denses.size(); ++l) {
    const auto& g = denses[l];
    const auto& a = acc.dense_w[l];
    for (int i = 0; i < g.in; ++i) {
      const std::size_t col = l == 0 ? canonical_column(layout_, i) : static_cast<std::size_t>(i);
      for (int o = 0; o < g.out; ++o)
        grad[g.w_off + static_cast<std::size_t>(o) * g.in + col] += a[static_cast<std::size_t>(i) * g.out + o];
    }
    for (int o = 0; o < g.out; ++o) grad[g.b_off + o] += acc.dense_b[l][o];
  }
}

std::vector<double> Network::forward(const Params& params, const SparseInput& x) const {
  return forward(PreparedParams(*this, params), x);
}

std::vector<double> Network::forward(const PreparedParams& prepared, const SparseInput& x) const {
  check_input(x);
  Workspace ws;
  forward_item(prepared, x, ws);
  return ws.h.back();
}

void Network::forward_batch(const PreparedParams& prepared, std::span<const SparseInput> xs,
                            std::span<double> out) const {
  const int n = static_cast<int>(xs.size());
  const int outputs = arch().outputs;
  if (out.size() != xs.size() * outputs) throw ConfigError("forward_batch: output span has wrong size");
  for (const auto& x : xs) check_input(x);
#pragma omp parallel
  {
    Workspace ws;
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      forward_item(prepared, xs[i], ws);
      std::copy(ws.h.back().begin(), ws.h.back().end(), out.begin() + static_cast<std::size_t>(i) * outputs);
    }
  }
}

void Network::backward(const Params& params, const SparseInput& x, std::span<const double> upstream,
                       std::span<double> grad) const {
  check_input(x);
  if (static_cast<int>(upstream.size()) != arch().outputs)
    throw ConfigError("backward: upstream gradient length does not match outputs");
  if (grad.size() != parameter_count()) throw ConfigError("backward: gradient buffer has wrong size");
  const PreparedParams prepared(*this, params);
  Workspace ws;
  Accumulator acc(layout_);
  forward_item(prepared, x, ws);
  backward_item(prepared, x, ws, upstream, acc);
  finalize(acc, grad);
}

double Network::gradient_batch(const PreparedParams& prepared, std::span<const SparseInput> xs,
                               const UpstreamFn& upstream, std::span<double> grad) const {
  if (grad.size() != parameter_count()) throw ConfigError("gradient_batch: gradient buffer has wrong size");
  for (const auto& x : xs) check_input(x);
  const int n = static_cast<int>(xs.size());
  const int outputs = arch().outputs;
  std::vector<Accumulator> accs(kGradientChunks, Accumulator(layout_));
  std::vector<double> losses(kGradientChunks, 0.0);
  std::vector<std::exception_ptr> errors(kGradientChunks);
#pragma omp parallel for schedule(static, 1)
  for (int chunk = 0; chunk < kGradientChunks; ++chunk) {
    try {
      Workspace ws;
      std::vector<double> dq(outputs);
      const int lo = chunk * n / kGradientChunks, hi = (chunk + 1) * n / kGradientChunks;
      for (int i = lo; i < hi; ++i) {
        forward_item(prepared, xs[i], ws);
        std::fill(dq.begin(), dq.end(), 0.0);
        losses[chunk] += upstream(i, ws.h.back(), dq);
        backward_item(prepared, xs[i], ws, dq, accs[chunk]);
      }
    } catch (...) {
      errors[chunk] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (int chunk = 0; chunk < kGradientChunks; ++chunk) {
    finalize(accs[chunk], grad);
    loss += losses[chunk];
  }
  return loss;
}

std::vector<std::uint8_t> Network::relu_pattern(const Params& params, const SparseInput& x) const {
  check_input(x);
  const PreparedParams prepared(*this, params);
  Workspace ws;
  forward_item(prepared, x, ws);
  std::vector<std::uint8_t> bits;
  for (const auto& c : ws.conv)
    for (double a : c) bits.push_back(a > 0.0);
  const auto& denses = layout_.denses();
  for (std::size_t l = 0; l < denses.size(); ++l)
    if (denses[l].relu)
      for (double a : ws.h[l + 1]) bits.push_back(a > 0.0);
  return bits;
}

GradCheckResult grad_check(const Network& net, const Params& params, const SparseInput& x,
                           std::span<const double> upstream, std::uint64_t seed, int coordinates, double step,
                           const BackwardFn& backward) {
  constexpr double kFloor = 1e-7;
  std::vector<double> analytic(net.parameter_count(), 0.0);
  if (backward)
    backward(params, x, upstream, analytic);
  else
    net.backward(params, x, upstream, analytic);

  auto loss = [&](const Params& p) {
    const auto q = net.forward(p, x);
    double s = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) s += upstream[k] * q[k];
    return s;
  };
  const auto pattern = net.relu_pattern(params, x);

  // Spread the sample over blocks so small bias blocks are always covered;
  // whatever a small block cannot use goes to a uniform draw over the rest.
  std::mt19937_64 rng(seed);
  const auto& blocks = net.layout().blocks();
  std::vector<std::size_t> picks, pool;
  const std::size_t quota = (coordinates + blocks.size() - 1) / blocks.size();
  for (const auto& b : blocks) {
    std::vector<std::size_t> idx(b.size);
    for (std::size_t k = 0; k < b.size; ++k) idx[k] = b.offset + k;
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t take = std::min(idx.size(), quota);
    picks.insert(picks.end(), idx.begin(), idx.begin() + take);
    pool.insert(pool.end(), idx.begin() + take, idx.end());
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  const std::size_t target = std::min<std::size_t>(coordinates, net.parameter_count());
  for (std::size_t k = 0; picks.size() < target && k < pool.size(); ++k) picks.push_back(pool[k]);

  GradCheckResult r;
  Params p = params;
  for (std::size_t i : picks) {
    p[i] = params[i] + step;
    const bool same_plus = net.relu_pattern(p, x) == pattern;
    const double lp = loss(p);
    p[i] = params[i] - step;
    const bool same_minus = net.relu_pattern(p, x) == pattern;
    const double lm = loss(p);
    p[i] = params[i];
    if (!same_plus || !same_minus) {
      ++r.coordinates_skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2.0 * step);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kFloor});
    r.max_relative_error = std::max(r.max_relative_error, rel);
    ++r.coordinates_checked;
  }
  return r;
}

}  // namespace camho::nn
