#include <benchmark/benchmark.h>

#include "common.hpp"
#include "srn/attack.hpp"
#include "srn/baseline.hpp"
#include "srn/lipnet.hpp"
#include "srn/model.hpp"
#include "srn/rng.hpp"
#include "srn/stablerank.hpp"

namespace {

using namespace srn;

lipnet::LipschitzNetwork random_net(std::size_t in, const std::vector<std::size_t>& sizes) {
  Rng rng(5);
  lipnet::LipschitzNetwork net(in, sizes);
  for (auto& layer : net.layers()) {
    for (auto& w : layer.weights) w = rng.uniform(-1, 1);
  }
  return net;
}

void BM_StableRankVector(benchmark::State& state) {
  const auto d = bench::orbit_diagram(300);
  const auto p = state.range(0) == 0 ? metric::MetricParams::infinity() : metric::MetricParams(2.0);
  const auto id = stablerank::Reparameterization::identity();
  for (auto _ : state) benchmark::DoNotOptimize(stablerank::stable_rank_vector(d, p, id, 100));
}
BENCHMARK(BM_StableRankVector)->Arg(0)->Arg(2);

void BM_LipnetForwardBatch(benchmark::State& state) {
  const auto net = random_net(100, {1200, 700, 300, 80, 5});
  Rng rng(6);
  Matrix x(static_cast<std::size_t>(state.range(0)), 100);
  for (auto& v : x.data()) v = rng.uniform(0, 50);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LipnetForwardBatch)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_LipnetTrainStep(benchmark::State& state) {
  const auto net = random_net(100, {1200, 700, 300, 80, 5});
  Rng rng(7);
  Matrix x(64, 100);
  for (auto& v : x.data()) v = rng.uniform(0, 50);
  Matrix up(64, 5, 0.1);
  const int relax_p = static_cast<int>(state.range(0));
  for (auto _ : state) {
    lipnet::ForwardCache cache;
    lipnet::forward_cached(net, x, lipnet::Mode::train, cache, relax_p);
    benchmark::DoNotOptimize(lipnet::backward(net, cache, up));
  }
}
BENCHMARK(BM_LipnetTrainStep)->Arg(0)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_DeepSetForward(benchmark::State& state) {
  const auto net = baseline::make_deepset(5, 100.0, 1);
  const auto d = bench::orbit_diagram(300);
  for (auto _ : state) benchmark::DoNotOptimize(baseline::deepset_forward(net, d));
}
BENCHMARK(BM_DeepSetForward);

void BM_AttackDeepSet(benchmark::State& state) {
  const auto net = baseline::make_deepset(5, 100.0, 1);
  const auto d = bench::orbit_diagram(300);
  attack::DeepSetClassifier clf(net);
  attack::AttackConfig cfg;
  cfg.steps = 20;
  cfg.lambdas = {1.0};
  cfg.restarts = 0;
  cfg.budget = 1e-2;
  const int label = lipnet::predict(clf.logits(d));
  for (auto _ : state) benchmark::DoNotOptimize(attack::attack(clf, d, label, cfg));
}
BENCHMARK(BM_AttackDeepSet)->Unit(benchmark::kMillisecond);

}  // namespace
