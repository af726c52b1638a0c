// Serial reference kernels against the optimised / OpenMP ones, on inputs
// shaped like real training traffic (reference-scene frames).

#include <benchmark/benchmark.h>

#include "camho/baselines.hpp"
#include "camho/nn/encoder.hpp"
#include "camho/nn/network.hpp"
#include "camho/nn/reference.hpp"
#include "camho/scenario.hpp"

using namespace camho;

namespace {

struct Fixture {
  Trace trace;
  ProcessConfig pcfg;
  std::vector<int> cameras{1, 2};
  nn::Network net;
  nn::Params params;
  std::vector<nn::SparseState> states;
  std::vector<nn::StateEncoding> dense;

  Fixture()
      : trace([] {
          auto s = reference_scenario();
          s.duration_epochs = 600;
          return synthesize_trace(s);
        }()),
        net(nn::q_arch_for(trace, pcfg, cameras)),
        params(nn::init_params(net.layout(), 1)) {
    for (int i = 0; i < 32; ++i) {
      const DecisionState s{10 + 17 * i, 1 + i % 2, 0};
      states.push_back(nn::encode_sparse(s, trace, pcfg, cameras));
      dense.push_back(nn::encode_state(s, trace, pcfg, cameras));
    }
  }
  std::vector<nn::SparseInput> views() const {
    std::vector<nn::SparseInput> v;
    for (const auto& s : states) v.push_back(s.view());
    return v;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

const nn::UpstreamFn kUpstream = [](int item, std::span<const double> q, std::span<double> dq) {
  dq[0] = q[0] - 0.01 * item;
  dq[1] = 0.0;
  return 0.5 * dq[0] * dq[0];
};

void BM_ForwardBatch_Reference(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st)
    for (const auto& x : f.dense) benchmark::DoNotOptimize(nn::reference::forward(f.net.layout(), f.params, x));
  st.SetItemsProcessed(st.iterations() * f.dense.size());
}

void BM_ForwardBatch_Optimized(benchmark::State& st) {
  const auto& f = fixture();
  const nn::PreparedParams prep(f.net, f.params);
  const auto xs = f.views();
  std::vector<double> out(xs.size() * 2);
  for (auto _ : st) {
    f.net.forward_batch(prep, xs, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * xs.size());
}

void BM_GradientBatch_Reference(benchmark::State& st) {
  const auto& f = fixture();
  std::vector<double> grad(f.net.parameter_count());
  for (auto _ : st) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < f.dense.size(); ++i) {
      const auto q = nn::reference::forward(f.net.layout(), f.params, f.dense[i]);
      std::vector<double> dq(2);
      kUpstream(static_cast<int>(i), q, dq);
      nn::reference::backward(f.net.layout(), f.params, f.dense[i], dq, grad);
    }
    benchmark::DoNotOptimize(grad.data());
  }
  st.SetItemsProcessed(st.iterations() * f.dense.size());
}

void BM_GradientBatch_Optimized(benchmark::State& st) {
  const auto& f = fixture();
  const nn::PreparedParams prep(f.net, f.params);
  const auto xs = f.views();
  std::vector<double> grad(f.net.parameter_count());
  for (auto _ : st) {
    benchmark::DoNotOptimize(f.net.gradient_batch(prep, xs, kUpstream, grad));
  }
  st.SetItemsProcessed(st.iterations() * xs.size());
}

void BM_DpOracle(benchmark::State& st) {
  const auto& f = fixture();
  ProcessConfig p = f.pcfg;
  p.disruption_ms = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(dp_oracle(f.trace, p).average_bps);
  st.SetItemsProcessed(st.iterations() * f.trace.length());
}

void BM_Synthesize(benchmark::State& st) {
  auto s = reference_scenario();
  s.duration_epochs = 500;
  for (auto _ : st) benchmark::DoNotOptimize(synthesize_raw_trace(s).length);
  st.SetItemsProcessed(st.iterations() * s.duration_epochs);
}

}  // namespace

BENCHMARK(BM_ForwardBatch_Reference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ForwardBatch_Optimized)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GradientBatch_Reference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GradientBatch_Optimized)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DpOracle)->Arg(0)->Arg(120)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Synthesize)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
