#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "../support/oracles.hpp"
#include "srn/baseline.hpp"
#include "srn/errors.hpp"

namespace srn {
namespace {

using baseline::DeepSetNet;
using testing::random_diagram;

constexpr std::size_t H = DeepSetNet::kHidden;
constexpr std::size_t K = DeepSetNet::kTop;

TEST(DeepSet, Shapes) {
  const auto net = baseline::make_deepset(5, 2.0, 1);
  EXPECT_EQ(net.w1.size(), H * 2);
  EXPECT_EQ(net.w2.size(), H * H);
  EXPECT_EQ(net.wh.size(), 5 * H * K);
  EXPECT_EQ(DeepSetNet::feature_dim(), 125u);
  for (double b : net.b1) EXPECT_EQ(b, 0.0);
}

TEST(DeepSet, PermutationInvariant) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto net = testing::random_deepset(rng);
    auto d = random_diagram(rng, 12);
    const auto a = baseline::deepset_forward(net, d);
    rng.shuffle(d.points);
    const auto b = baseline::deepset_forward(net, d);
    ASSERT_EQ(a.size(), 5u);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(a[c], b[c], 1e-12);
  }
}

TEST(DeepSet, IdenticalPointsFillEveryTopSlot) {
  Rng rng(2);
  const auto net = testing::random_deepset(rng);
  PersistenceDiagram d{1, std::vector<DiagramPoint>(5, DiagramPoint{0.3, 1.7})};
  baseline::DeepSetCache cache;
  baseline::deepset_forward(net, d, cache);
  EXPECT_EQ(cache.n_real, 5u);
  for (std::size_t k = 0; k < H; ++k) {
    for (std::size_t t = 1; t < K; ++t) EXPECT_EQ(cache.features[k * K + t], cache.features[k * K]);
  }
}

TEST(DeepSet, EmptyDiagramPadsWithOrigin) {
  Rng rng(3);
  const auto net = testing::random_deepset(rng);
  const auto empty = baseline::deepset_forward(net, PersistenceDiagram{});
  const auto origin = baseline::deepset_forward(net, PersistenceDiagram{1, {{0.0, 0.0}}});
  EXPECT_EQ(empty, origin);
  baseline::DeepSetCache cache;
  baseline::deepset_forward(net, PersistenceDiagram{}, cache);
  EXPECT_EQ(cache.points.size(), K);
  EXPECT_EQ(cache.n_real, 0u);
  const std::vector<double> up(5, 1.0);
  EXPECT_TRUE(baseline::deepset_backward(net, cache, up).points.empty());
}

TEST(DeepSet, InputScaleDividesCoordinates) {
  Rng rng(4);
  auto net = testing::random_deepset(rng);
  const auto d = random_diagram(rng, 8);
  PersistenceDiagram big = d;
  for (auto& p : big.points) {
    p.birth *= 4.0;
    p.death *= 4.0;
  }
  const auto a = baseline::deepset_forward(net, d);
  net.input_scale = 4.0;
  const auto b = baseline::deepset_forward(net, big);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(a[c], b[c], 1e-12);
}

TEST(DeepSet, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto net = testing::random_deepset(rng, trial % 2 ? 3.0 : 1.0);
    auto d = random_diagram(rng, 9);
    if (testing::deepset_kink_gap(net, d) < 1e-6) continue;
    const auto up = testing::random_vector(rng, 5);
    baseline::DeepSetCache cache;
    baseline::deepset_forward(net, d, cache);
    const auto g = baseline::deepset_backward(net, cache, up);
    auto f = [&] {
      const auto l = baseline::deepset_forward(net, d);
      double s = 0;
      for (std::size_t c = 0; c < 5; ++c) s += l[c] * up[c];
      return s;
    };
    constexpr double h = 1e-8;
    EXPECT_LT(testing::relative_error(g.w1, testing::central_differences(net.w1, f, h)), 1e-4);
    EXPECT_LT(testing::relative_error(g.b1, testing::central_differences(net.b1, f, h)), 1e-4);
    EXPECT_LT(testing::relative_error(g.w2, testing::central_differences(net.w2, f, h)), 1e-4);
    EXPECT_LT(testing::relative_error(g.b2, testing::central_differences(net.b2, f, h)), 1e-4);
    EXPECT_LT(testing::relative_error(g.wh, testing::central_differences(net.wh, f, h)), 1e-4);
    EXPECT_LT(testing::relative_error(g.bh, testing::central_differences(net.bh, f, h)), 1e-4);

    ASSERT_EQ(g.points.size(), d.points.size());
    std::vector<double> coords;
    for (const auto& p : d.points) {
      coords.push_back(p.birth);
      coords.push_back(p.death);
    }
    auto fc = [&] {
      for (std::size_t i = 0; i < d.points.size(); ++i) d.points[i] = {coords[2 * i], coords[2 * i + 1]};
      return f();
    };
    const auto num = testing::central_differences(coords, fc, h);
    std::vector<double> ana;
    for (const auto& p : g.points) {
      ana.push_back(p.birth);
      ana.push_back(p.death);
    }
    EXPECT_LT(testing::relative_error(ana, num), 1e-4) << "trial " << trial;
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

std::pair<std::vector<PersistenceDiagram>, std::vector<int>> toy_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PersistenceDiagram> ds;
  std::vector<int> ys;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 5);
    PersistenceDiagram d;
    const std::size_t m = 3 + rng.below(4);
    for (std::size_t j = 0; j < m; ++j) {
      const double b = rng.uniform(0, 1);
      d.points.push_back({b, b + 0.5 + c + rng.uniform(0, 0.3)});
    }
    ds.push_back(d);
    ys.push_back(c);
  }
  return {ds, ys};
}

TEST(DeepSetTrain, LearnsAndIsDeterministic) {
  const auto [ds, ys] = toy_data(150, 6);
  baseline::DeepSetTrainConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 2;
  const auto a = baseline::train_deepset(ds, ys, cfg);
  ASSERT_EQ(a.history.size(), 40u);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += lipnet::predict(baseline::deepset_forward(a.net, ds[i])) == ys[i];
  EXPECT_GT(ok, 120u);
  const auto b = baseline::train_deepset(ds, ys, cfg);
  EXPECT_EQ(a.net.w2, b.net.w2);
  EXPECT_EQ(a.net.wh, b.net.wh);
}

TEST(DeepSetTrain, RejectsMismatch) {
  const auto [ds, ys] = toy_data(10, 7);
  std::vector<int> short_labels(ys.begin(), ys.end() - 1);
  EXPECT_THROW(baseline::train_deepset(ds, short_labels, {}), ParameterError);
}

}  // namespace
}  // namespace srn
