#include <benchmark/benchmark.h>

#include <algorithm>

#include "common.hpp"
#include "srn/metric.hpp"
#include "srn/rng.hpp"

namespace {

using namespace srn;

// Two diagrams from different classes, truncated to the `n` most persistent points.
std::pair<PersistenceDiagram, PersistenceDiagram> diagram_pair(std::size_t n) {
  auto keep = [n](PersistenceDiagram d) {
    std::sort(d.points.begin(), d.points.end(),
              [](const DiagramPoint& a, const DiagramPoint& b) { return a.persistence() > b.persistence(); });
    if (d.points.size() > n) d.points.resize(n);
    return d;
  };
  return {keep(bench::orbit_diagram(600, 4.0, 1)), keep(bench::orbit_diagram(600, 4.3, 2))};
}

void BM_Bottleneck(benchmark::State& state) {
  const auto [a, b] = diagram_pair(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metric::bottleneck(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Bottleneck)->RangeMultiplier(2)->Range(16, 256)->Complexity()->Unit(benchmark::kMicrosecond);

void BM_Wasserstein(benchmark::State& state) {
  const auto [a, b] = diagram_pair(static_cast<std::size_t>(state.range(0)));
  const double p = static_cast<double>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(metric::wasserstein(a, b, p));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Wasserstein)
    ->ArgsProduct({{16, 32, 64, 128, 256}, {1, 2}})
    ->Unit(benchmark::kMicrosecond);

void BM_SolveAssignment(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> cost(n * n);
  for (auto& c : cost) c = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(metric::solve_assignment(cost, n));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveAssignment)->RangeMultiplier(2)->Range(16, 512)->Complexity(benchmark::oNCubed);

}  // namespace
