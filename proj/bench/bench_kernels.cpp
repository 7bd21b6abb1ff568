#include <benchmark/benchmark.h>

#include <random>

#include "stencilml/kernels.hpp"
#include "stencilml/labeling.hpp"

using namespace stencilml;
using kernels::Matrix;

namespace {

template <class Real>
Matrix<Real> random_matrix(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix<Real> m(r, c);
  for (Real& v : m.values) v = static_cast<Real>(d(rng));
  return m;
}

// Shapes of the classifier's widest per-point layer: (batch * points) x 256 times 256 x 2048.
template <class Real>
void BM_Gemm(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const auto a = random_matrix<Real>(rows, 256, 1);
  const auto b = random_matrix<Real>(256, 2048, 2);
  Matrix<Real> c(rows, 2048);
  for (auto _ : state) {
    kernels::gemm(a, b, c);
    benchmark::DoNotOptimize(c.values.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * rows * 256 * 2048, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

template <class Real>
void BM_GemmReference(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const auto a = random_matrix<Real>(rows, 256, 1);
  const auto b = random_matrix<Real>(256, 2048, 2);
  Matrix<Real> c(rows, 2048);
  for (auto _ : state) {
    kernels::reference::gemm(a, b, c);
    benchmark::DoNotOptimize(c.values.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * rows * 256 * 2048, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

void BM_ColumnSums(benchmark::State& state) {
  const auto a = random_matrix<float>(15360, 256, 3);
  std::vector<double> out;
  for (auto _ : state) {
    kernels::column_sums(a, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_ColumnSumsReference(benchmark::State& state) {
  const auto a = random_matrix<float>(15360, 256, 3);
  std::vector<double> out;
  for (auto _ : state) {
    kernels::reference::column_sums(a, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_Labeling(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  static const NodeCloud cloud = fill_nodes({{0.0, 0.0}, {1.0, 1.0}}, 0.02, 1);
  GenConfig gen;
  gen.stencil_size = 15;
  for (auto _ : state) {
    auto records = generate_labeled(cloud, gen, 1500, workers);
    benchmark::DoNotOptimize(records.data());
  }
  state.SetItemsProcessed(state.iterations() * 1500);
}

}  // namespace

BENCHMARK(BM_Gemm<float>)->Arg(1536)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmReference<float>)->Arg(1536)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<double>)->Arg(1536)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmReference<double>)->Arg(1536)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ColumnSums)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ColumnSumsReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Labeling)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
