// Serial double loop vs blocked OpenMP kernel on random unit vectors.
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "idcurate/kernels.hpp"

namespace k = idcurate::kernels;

namespace {

std::vector<float> unit_rows(std::size_t n, std::size_t dim) {
  std::mt19937_64 gen(n * 31 + dim);
  std::normal_distribution<float> z;
  std::vector<float> v(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0;
    for (std::size_t d = 0; d < dim; ++d) sq += double(v[i * dim + d] = z(gen)) * v[i * dim + d];
    for (std::size_t d = 0; d < dim; ++d) v[i * dim + d] = float(v[i * dim + d] / std::sqrt(sq));
  }
  return v;
}

void pairs(benchmark::State& state, bool blocked) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 512;
  const auto data = unit_rows(n, dim);
  const k::MatrixView m{data, n, dim};
  for (auto _ : state) {
    auto r = blocked ? k::omp::pairs_above(m, 0.2, {static_cast<std::size_t>(state.range(1)), 0})
                     : k::serial::pairs_above(m, 0.2);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t(n * (n - 1) / 2));
}

void BM_serial(benchmark::State& s) { pairs(s, false); }
void BM_omp(benchmark::State& s) { pairs(s, true); }

}  // namespace

BENCHMARK(BM_serial)->Args({1000, 0})->Args({3000, 0})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_omp)->ArgsProduct({{1000, 3000}, {64, 128, 256}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
