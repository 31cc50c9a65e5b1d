#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "srn/baseline.hpp"
#include "srn/metric.hpp"
#include "srn/model.hpp"
#include "srn/types.hpp"

namespace srn::attack {

/// A classifier on diagrams that exposes gradients with respect to the point
/// coordinates.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::vector<double> logits(const PersistenceDiagram& d) const = 0;
  /// d<dlogits, logits(d)>/d(birth, death), one entry per point of d.
  virtual std::vector<DiagramPoint> input_gradient(const PersistenceDiagram& d,
                                                   std::span<const double> dlogits) const = 0;
};

class SrnClassifier final : public Classifier {
 public:
  explicit SrnClassifier(const model::SrnModel& model) : model_(model) {}
  std::vector<double> logits(const PersistenceDiagram& d) const override;
  std::vector<DiagramPoint> input_gradient(const PersistenceDiagram& d,
                                           std::span<const double> dlogits) const override;

 private:
  const model::SrnModel& model_;
};

class DeepSetClassifier final : public Classifier {
 public:
  explicit DeepSetClassifier(const baseline::DeepSetNet& net) : net_(net) {}
  std::vector<double> logits(const PersistenceDiagram& d) const override;
  std::vector<DiagramPoint> input_gradient(const PersistenceDiagram& d,
                                           std::span<const double> dlogits) const override;

 private:
  const baseline::DeepSetNet& net_;
};

struct AttackConfig {
  /// Weights of the cross-entropy term; every value is tried and the
  /// successful iterate of least distance is kept.
  std::vector<double> lambdas{0.1, 1.0, 10.0};
  std::size_t steps = 100;
  /// Initial step length as a fraction of the largest death in D. Steps are
  /// taken along the gradient normalized to unit max-norm and decay linearly.
  double step_size = 0.05;
  std::size_t n_added = 10;
  double init_offset = 1e-3;
  /// Extra random starts per lambda. The first start places the added points
  /// over the occupied birth range of D; the others spread them over
  /// [0, init_spread * max death], since an added point that no feature of
  /// the classifier responds to receives no gradient.
  std::size_t restarts = 1;
  double init_spread = 8.0;
  metric::MetricParams p = metric::MetricParams::infinity();
  /// When set, every iterate is projected into the ball W_p(D, D') <= budget
  /// and the search stops at the first success.
  std::optional<double> budget;
  /// p = inf: the log-sum-exp temperature is this fraction of the current
  /// distance, annealed geometrically from the first to the second value.
  double temperature_start = 0.5;
  double temperature_end = 0.01;
  std::uint64_t seed = 0;
};

struct AttackResult {
  PersistenceDiagram adversarial;
  double distance = 0.0;  // exact W_p(D, D')
  bool success = false;
  int predicted = -1;
  std::size_t iterations = 0;  // summed over the lambda runs
  double lambda = 0.0;         // lambda of the returned iterate
  /// |surrogate - exact| distance at the returned iterate (p = inf only).
  double surrogate_gap = 0.0;
  /// A non-finite gradient stopped a run early.
  bool aborted = false;
};

/// Projected gradient search for D' minimizing W_p(D, D') - lambda * CE.
/// Every point of the result satisfies 0 <= birth <= death.
AttackResult attack(const Classifier& classifier, const PersistenceDiagram& d, int true_class,
                    const AttackConfig& config);

/// {0 <= a <= b}: a point below the diagonal moves to its midpoint, then
/// negative coordinates are clipped.
DiagramPoint project_feasible(DiagramPoint x);

struct AttackRecord {
  std::size_t sample_id = 0;
  bool clean_correct = false;
  bool success = false;
  double distance = 0.0;
  std::size_t iterations = 0;
};

/// Attacks every correctly classified diagram with budget eps. Misclassified
/// samples count as non-robust; eps = 0 returns the clean accuracy.
double empirical_robust_accuracy(const Classifier& classifier,
                                 std::span<const PersistenceDiagram> diagrams,
                                 std::span<const int> labels, double eps,
                                 const AttackConfig& config,
                                 std::vector<AttackRecord>* records = nullptr);

/// Robust accuracy over an ascending eps grid. A sample broken at some eps
/// counts as broken at every larger eps, so the curve is non-increasing.
std::vector<double> robust_accuracy_curve(const Classifier& classifier,
                                          std::span<const PersistenceDiagram> diagrams,
                                          std::span<const int> labels,
                                          std::span<const double> eps_grid,
                                          const AttackConfig& config);

}  // namespace srn::attack
