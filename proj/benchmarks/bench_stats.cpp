#include <benchmark/benchmark.h>

#include "mend/stats.hpp"

namespace {

void BM_ChiSquare(benchmark::State& state) {
  const auto table = mend::stats::ContingencyTable::from_counts({{197, 3}, {192, 8}, {191, 9}});
  for (auto _ : state) benchmark::DoNotOptimize(mend::stats::chi_square(table));
}
BENCHMARK(BM_ChiSquare);

void BM_ChiSquareSf(benchmark::State& state) {
  const int df = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mend::stats::chi_square_sf(3.21 * df, df));
}
BENCHMARK(BM_ChiSquareSf)->Arg(2)->Arg(20)->Arg(200);

void BM_AnovaOneway(benchmark::State& state) {
  std::vector<std::vector<double>> groups(3);
  for (int g = 0; g < 3; ++g)
    for (int i = 0; i < 200; ++i) groups[g].push_back(static_cast<double>((i * 7 + g * 13) % 23));
  for (auto _ : state) benchmark::DoNotOptimize(mend::stats::anova_oneway(groups));
}
BENCHMARK(BM_AnovaOneway);

void BM_CohenKappa(benchmark::State& state) {
  std::vector<int> a(600), b(600);
  for (int i = 0; i < 600; ++i) {
    a[i] = i % 3 != 0;
    b[i] = i % 5 != 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(mend::stats::cohen_kappa(a, b));
}
BENCHMARK(BM_CohenKappa);

}  // namespace
