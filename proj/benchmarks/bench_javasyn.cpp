#include <benchmark/benchmark.h>

#include "mend/javasyn.hpp"

namespace {

std::string program(int methods) {
  std::string s;
  for (int i = 0; i < methods; ++i) {
    s += "public int f" + std::to_string(i) + "(int[] a) {\n"
         "  int sum = 0; // running total\n"
         "  for (int j = 0; j < a.length; j++) {\n"
         "    if (a[j] > 0) { sum += a[j]; } else { sum -= 1; }\n"
         "  }\n"
         "  String s = \"done\";\n"
         "  return sum;\n"
         "}\n";
  }
  return s;
}

void BM_Tokenize(benchmark::State& state) {
  const std::string src = program(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mend::javasyn::tokenize(src));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * src.size()));
}
BENCHMARK(BM_Tokenize)->Arg(1)->Arg(16)->Arg(256);

void BM_Parse(benchmark::State& state) {
  const std::string src = program(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mend::javasyn::parse(std::string_view(src)));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * src.size()));
}
BENCHMARK(BM_Parse)->Arg(1)->Arg(16)->Arg(256);

void BM_Skeleton(benchmark::State& state) {
  const std::string src = program(16);
  for (auto _ : state) benchmark::DoNotOptimize(mend::javasyn::extract_skeleton(src));
}
BENCHMARK(BM_Skeleton);

}  // namespace
