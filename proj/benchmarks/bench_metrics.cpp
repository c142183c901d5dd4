#include <benchmark/benchmark.h>

#include <random>

#include "mend/metrics.hpp"
#include "mend/repair.hpp"

namespace {

std::string random_source(std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string s(len, ' ');
  for (auto& c : s) c = "abcdefgh (){};=+\n"[rng() % 17];
  return s;
}

void BM_Levenshtein(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::string a = random_source(n, 1);
  std::string b = a;
  for (std::size_t i = 0; i < b.size(); i += 37) b[i] = '#';
  for (auto _ : state) benchmark::DoNotOptimize(mend::metrics::levenshtein(a, b));
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Levenshtein)->RangeMultiplier(4)->Range(64, 4096)->Complexity(benchmark::oNSquared);

void BM_ClassifyEdits(benchmark::State& state) {
  const std::string before = "int total = 0;\nfor (int i = 0; i < n; i++) {\n  total += a[i]\n}\nreturn total;\n";
  const std::string after = "int total = 0;\nfor (int i = 0; i < n; i++) {\n  total += a[i];\n}\nreturn total;\n";
  for (auto _ : state) benchmark::DoNotOptimize(mend::metrics::classify_edits(before, after));
}
BENCHMARK(BM_ClassifyEdits);

void BM_RuleRepair(benchmark::State& state) {
  const std::string src =
      "public int countEvens(int[] nums) {\n"
      "  int count = 0\n"
      "  for (int i = 0; i < nums.length; i++ {\n"
      "    If (nums[i] % 2 == 0) {\n"
      "      count++;\n"
      "    }\n"
      "  }\n"
      "  return count;\n";
  for (auto _ : state) benchmark::DoNotOptimize(mend::repair::repair(src));
}
BENCHMARK(BM_RuleRepair);

}  // namespace
