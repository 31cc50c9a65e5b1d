#include <benchmark/benchmark.h>

#include "common.hpp"
#include "srn/complex.hpp"

namespace {

using namespace srn;

void BM_Delaunay(benchmark::State& state) {
  const auto cloud = bench::orbit_cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(complex::delaunay_2d(cloud));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Delaunay)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_AlphaPersistenceH1(benchmark::State& state) {
  const auto cloud = bench::orbit_cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(complex::alpha_persistence(cloud, 1));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AlphaPersistenceH1)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_OrbitDataset(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(orbit::generate_dataset(20, 300, 1));
}
BENCHMARK(BM_OrbitDataset)->Unit(benchmark::kMillisecond);

}  // namespace
