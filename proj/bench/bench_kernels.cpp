#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "cosmic/kernels.hpp"
#include "cosmic/synth.hpp"
#include "cosmic/trainer.hpp"

namespace {

using namespace cosmic;

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Shapes as (m, n, k). A GRU input projection at H = 150 over a 1024-wide
// utterance vector is 1 × 450 × 1174, the common case at full scale.
void matmul_args(benchmark::internal::Benchmark* b) {
  b->Args({1, 450, 1174})->Args({1, 450, 150})->Args({16, 450, 150})->Args({128, 128, 128});
}

template <auto Kernel>
void BM_matmul_nt(benchmark::State& state) {
  const kernels::Dims d{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)),
                        static_cast<std::size_t>(state.range(2))};
  const auto a = gaussian(d.m * d.k, 1);
  const auto b = gaussian(d.n * d.k, 2);
  std::vector<double> out(d.m * d.n);
  for (auto _ : state) {
    Kernel(a, b, out, d);
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * d.m * d.n * d.k));
}

BENCHMARK(BM_matmul_nt<kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->Apply(matmul_args);
BENCHMARK(BM_matmul_nt<kernels::parallel::matmul_nt>)->Name("matmul_nt/openmp")->Apply(matmul_args);

// Split-level inference, parallel over conversations.
void BM_predict_split(benchmark::State& state) {
  static const SynthDataset data = [] {
    SynthConfig c;
    c.train_dialogues = 1;
    c.val_dialogues = 64;
    c.test_dialogues = 1;
    return synth_generate(c);
  }();
  const auto fd = feature_dims(data.data);
  const auto params = CosmicParams::initialized({fd.utterance, fd.commonsense, 64, 4}, Mode::bidirectional, 1);
  const int threads = static_cast<int>(state.range(0));
  kernels::set_parallel(false);
  for (auto _ : state) {
    auto p = predict_split(params, data.data.val, {}, threads);
    benchmark::DoNotOptimize(p.preds.data());
  }
  kernels::set_parallel(true);
}

BENCHMARK(BM_predict_split)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
