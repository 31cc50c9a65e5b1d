#include <gtest/gtest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "srn/attack.hpp"
#include "srn/errors.hpp"
#include "srn/metric.hpp"

namespace srn {
namespace {

using attack::AttackConfig;
using metric::MetricParams;
using testing::random_diagram;

// Class 1 wins once the total persistence exceeds 1.
class PersistenceClassifier final : public attack::Classifier {
 public:
  std::vector<double> logits(const PersistenceDiagram& d) const override {
    double s = 0.0;
    for (const auto& p : d.points) s += p.persistence();
    return {1.0, s};
  }
  std::vector<DiagramPoint> input_gradient(const PersistenceDiagram& d,
                                           std::span<const double> dlogits) const override {
    return std::vector<DiagramPoint>(d.points.size(), DiagramPoint{-dlogits[1], dlogits[1]});
  }
};

const PersistenceDiagram kShort{1, {{1.0, 1.5}}};

void expect_feasible(const PersistenceDiagram& d) {
  for (const auto& p : d.points) {
    EXPECT_GE(p.birth, 0.0);
    EXPECT_LE(p.birth, p.death);
  }
}

TEST(ProjectFeasible, Examples) {
  EXPECT_EQ(attack::project_feasible({2, 1}), (DiagramPoint{1.5, 1.5}));
  EXPECT_EQ(attack::project_feasible({-1, 3}), (DiagramPoint{0, 3}));
  EXPECT_EQ(attack::project_feasible({-3, -1}), (DiagramPoint{0, 0}));
  EXPECT_EQ(attack::project_feasible({0.5, 2}), (DiagramPoint{0.5, 2}));
}

TEST(Attack, BreaksPersistenceClassifier) {
  PersistenceClassifier clf;
  AttackConfig cfg;
  const auto r = attack::attack(clf, kShort, 0, cfg);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.predicted, 1);
  EXPECT_GT(r.distance, 0.0);
  EXPECT_LE(r.distance, 0.25 + 1e-9);
  expect_feasible(r.adversarial);
  EXPECT_NEAR(r.distance, metric::distance(kShort, r.adversarial, cfg.p), 1e-12);
}

TEST(Attack, BudgetTooSmallFails) {
  // 11 points gain at most 2 * 0.01 persistence each under W_inf <= 0.01.
  PersistenceClassifier clf;
  AttackConfig cfg;
  cfg.budget = 0.01;
  const auto r = attack::attack(clf, kShort, 0, cfg);
  EXPECT_FALSE(r.success);
  EXPECT_LE(metric::distance(kShort, r.adversarial, cfg.p), 0.01 + 1e-12);
}

TEST(Attack, LambdaZeroStaysNearInput) {
  PersistenceClassifier clf;
  AttackConfig cfg;
  cfg.lambdas = {0.0};
  const auto r = attack::attack(clf, kShort, 0, cfg);
  EXPECT_FALSE(r.success);
  EXPECT_LE(r.distance, cfg.init_offset);
  expect_feasible(r.adversarial);
}

TEST(Attack, ZeroStepsReturnsStart) {
  PersistenceClassifier clf;
  AttackConfig cfg;
  cfg.steps = 0;
  cfg.restarts = 0;
  cfg.lambdas = {1.0};
  const auto r = attack::attack(clf, kShort, 0, cfg);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.adversarial.points.size(), kShort.points.size() + cfg.n_added);
  EXPECT_EQ(r.adversarial.points[0], kShort.points[0]);
  EXPECT_NEAR(r.distance, cfg.init_offset / 2, 1e-15);
}

TEST(Attack, RejectsBadConfig) {
  PersistenceClassifier clf;
  AttackConfig cfg;
  cfg.lambdas = {};
  EXPECT_THROW(attack::attack(clf, kShort, 0, cfg), ParameterError);
  cfg.lambdas = {-1.0};
  EXPECT_THROW(attack::attack(clf, kShort, 0, cfg), ParameterError);
  cfg.lambdas = {1.0};
  cfg.budget = -0.5;
  EXPECT_THROW(attack::attack(clf, kShort, 0, cfg), ParameterError);
}

model::SrnModel small_srn(Rng& rng, std::size_t dim) {
  model::SrnModel m;
  m.dim = dim;
  m.net = testing::random_network(rng, dim, {10, 3});
  for (auto& w : m.net.layers()[0].weights) w = rng.uniform(0.0, 4.0);
  return m;
}

TEST(Attack, SrnFeasibleExactAndDeterministic) {
  Rng rng(1);
  const auto model = small_srn(rng, 6);
  attack::SrnClassifier clf(model);
  for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
    AttackConfig cfg;
    cfg.p = std::isinf(p) ? MetricParams::infinity() : MetricParams(p);
    cfg.steps = 30;
    cfg.seed = 4;
    for (int trial = 0; trial < 5; ++trial) {
      const auto d = random_diagram(rng, 6);
      const int label = lipnet::predict(model.logits(d));
      const auto a = attack::attack(clf, d, label, cfg);
      expect_feasible(a.adversarial);
      EXPECT_NEAR(a.distance, metric::distance(d, a.adversarial, cfg.p), 1e-12);
      if (a.success) { EXPECT_NE(lipnet::predict(model.logits(a.adversarial)), label); }
      const auto b = attack::attack(clf, d, label, cfg);
      EXPECT_EQ(a.distance, b.distance);
      EXPECT_EQ(a.adversarial.points, b.adversarial.points);
    }
  }
}

TEST(Attack, NeverBeatsCertificate) {
  Rng rng(2);
  int attacked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = small_srn(rng, 5);
    attack::SrnClassifier clf(model);
    const auto d = random_diagram(rng, 6);
    const int label = lipnet::predict(model.logits(d));
    const auto cert = model.certify(d, label);
    if (cert.certified_radius <= 0.0) continue;
    AttackConfig cfg;
    cfg.budget = 0.99 * cert.certified_radius;
    cfg.steps = 40;
    const auto r = attack::attack(clf, d, label, cfg);
    EXPECT_FALSE(r.success) << "trial " << trial;
    ++attacked;
  }
  EXPECT_GT(attacked, 10);
}

TEST(RobustAccuracy, ZeroEpsIsCleanAndCurveMonotone) {
  Rng rng(3);
  const auto model = small_srn(rng, 5);
  attack::SrnClassifier clf(model);
  std::vector<PersistenceDiagram> ds;
  std::vector<int> ys;
  std::size_t correct = 0;
  for (int i = 0; i < 12; ++i) {
    ds.push_back(random_diagram(rng, 5));
    ys.push_back(static_cast<int>(rng.below(3)));
    correct += lipnet::predict(model.logits(ds.back())) == ys.back();
  }
  AttackConfig cfg;
  cfg.steps = 20;
  std::vector<attack::AttackRecord> recs;
  EXPECT_DOUBLE_EQ(attack::empirical_robust_accuracy(clf, ds, ys, 0.0, cfg, &recs),
                   static_cast<double>(correct) / 12.0);
  ASSERT_EQ(recs.size(), 12u);
  const std::vector<double> grid{0.0, 0.05, 0.5, 2.0, 20.0};
  const auto curve = attack::robust_accuracy_curve(clf, ds, ys, grid, cfg);
  ASSERT_EQ(curve.size(), grid.size());
  EXPECT_DOUBLE_EQ(curve[0], static_cast<double>(correct) / 12.0);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i], curve[i - 1]);
  const std::vector<double> bad{0.5, 0.1};
  EXPECT_THROW(attack::robust_accuracy_curve(clf, ds, ys, bad, cfg), ParameterError);
  EXPECT_THROW(attack::empirical_robust_accuracy(clf, ds, ys, -1.0, cfg), ParameterError);
}

}  // namespace
}  // namespace srn
