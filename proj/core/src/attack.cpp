#include "srn/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srn/errors.hpp"
#include "srn/lipnet.hpp"
#include "srn/rng.hpp"
#include "srn/stablerank.hpp"

namespace srn::attack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const AttackConfig& config) {
  if (config.lambdas.empty()) throw ParameterError("attack: empty lambda grid");
  for (double l : config.lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ParameterError("attack: lambda must be >= 0");
  }
  if (!(config.step_size > 0.0)) throw ParameterError("attack: step size must be positive");
  if (!(config.init_offset > 0.0)) throw ParameterError("attack: init offset must be positive");
  if (config.budget && !(*config.budget >= 0.0)) {
    throw ParameterError("attack: budget must be non-negative");
  }
  if (!(config.temperature_start > 0.0) || !(config.temperature_end > 0.0)) {
    throw ParameterError("attack: temperatures must be positive");
  }
}

// Softmax minus one-hot: the gradient of the cross-entropy at the logits.
std::vector<double> cross_entropy_gradient(std::span<const double> logits, int true_class) {
  std::vector<double> g(logits.size());
  lipnet::loss_and_gradient(logits, true_class, lipnet::LossKind::cross_entropy, 0.0, 1.0, g);
  return g;
}

// Gradient of d(x, y) with respect to y.
DiagramPoint point_distance_gradient(const DiagramPoint& x, const DiagramPoint& y,
                                     metric::MetricParams p) {
  const double d0 = y.birth - x.birth;
  const double d1 = y.death - x.death;
  if (p.is_infinite()) {
    if (d0 == 0.0 && d1 == 0.0) return {0.0, 0.0};
    if (std::abs(d0) >= std::abs(d1)) return {std::copysign(1.0, d0), 0.0};
    return {0.0, std::copysign(1.0, d1)};
  }
  const double c = metric::point_distance(x, y, p);
  if (c == 0.0) return {0.0, 0.0};
  const double q = p.p();
  return {std::copysign(std::pow(std::abs(d0) / c, q - 1.0), d0),
          std::copysign(std::pow(std::abs(d1) / c, q - 1.0), d1)};
}

struct DistanceTerm {
  double value = 0.0;  // surrogate for p = inf, exact cost of the matching otherwise
  std::vector<DiagramPoint> grad;
};

// Distance term through a fixed optimal matching. For p = inf the max over
// matched costs is replaced by a log-sum-exp at temperature tau.
DistanceTerm distance_term(const PersistenceDiagram& d, const PersistenceDiagram& x,
                           metric::MetricParams p, double tau, double bound) {
  const auto m = metric::optimal_matching(d, x, p, bound);
  struct Cost {
    double value;
    int right;  // index in x, or -1 for a point of d sent to the diagonal
    DiagramPoint grad;
  };
  std::vector<Cost> costs;
  const double kappa = p.is_infinite() ? 0.5 : 0.5 * std::pow(2.0, 1.0 / p.p());
  for (const auto& [i, j] : m.pairs) {
    costs.push_back({metric::point_distance(d.points[i], x.points[j], p), j,
                     point_distance_gradient(d.points[i], x.points[j], p)});
  }
  for (int j : m.unmatched_right) {
    costs.push_back({metric::diagonal_distance(x.points[j], p), j, {-kappa, kappa}});
  }
  for (int i : m.unmatched_left) {
    costs.push_back({metric::diagonal_distance(d.points[i], p), -1, {0.0, 0.0}});
  }

  DistanceTerm out;
  out.grad.assign(x.points.size(), DiagramPoint{0.0, 0.0});
  if (costs.empty()) return out;
  std::vector<double> weight(costs.size());
  if (p.is_infinite()) {
    double top = 0.0;
    for (const auto& c : costs) top = std::max(top, c.value);
    double z = 0.0;
    for (std::size_t k = 0; k < costs.size(); ++k) {
      weight[k] = std::exp((costs[k].value - top) / tau);
      z += weight[k];
    }
    for (auto& w : weight) w /= z;
    out.value = top + tau * std::log(z);
  } else {
    const double q = p.p();
    double total = 0.0;
    for (const auto& c : costs) total += std::pow(c.value, q);
    out.value = std::pow(total, 1.0 / q);
    for (std::size_t k = 0; k < costs.size(); ++k) {
      weight[k] = out.value > 0.0 ? std::pow(costs[k].value / out.value, q - 1.0) : 0.0;
    }
  }
  for (std::size_t k = 0; k < costs.size(); ++k) {
    if (costs[k].right < 0) continue;
    auto& g = out.grad[static_cast<std::size_t>(costs[k].right)];
    g.birth += weight[k] * costs[k].grad.birth;
    g.death += weight[k] * costs[k].grad.death;
  }
  return out;
}

// Cost of the matching that pairs every point of d with its own iterate and
// sends the added points to the diagonal: an upper bound on W_p(d, x).
double tracking_cost(const PersistenceDiagram& d, const PersistenceDiagram& x,
                     metric::MetricParams p) {
  metric::Matching m;
  for (std::size_t j = 0; j < x.points.size(); ++j) {
    if (j < d.points.size()) {
      m.pairs.emplace_back(static_cast<int>(j), static_cast<int>(j));
    } else {
      m.unmatched_right.push_back(static_cast<int>(j));
    }
  }
  return metric::matching_cost(d, x, m, p);
}

// Keeps x within the L_inf ball of radius eps around d: original points stay
// in a box around their source, added points in a band along the diagonal.
// Sufficient for W_inf(d, x) <= eps.
void project_box(const PersistenceDiagram& d, PersistenceDiagram& x, double eps) {
  const double r = eps * (1.0 - 1e-12);
  for (std::size_t j = 0; j < x.points.size(); ++j) {
    auto& pt = x.points[j];
    if (j < d.points.size()) {
      const auto& src = d.points[j];
      pt.birth = std::clamp(pt.birth, src.birth - r, src.birth + r);
      pt.death = std::clamp(pt.death, src.death - r, src.death + r);
      pt = project_feasible(pt);
    } else if (pt.death - pt.birth > 2.0 * r) {
      const double mid = 0.5 * (pt.birth + pt.death);
      pt = project_feasible({mid - r, mid + r});
      pt.death = std::min(pt.death, pt.birth + 2.0 * r);
    }
  }
}

// Finite p: pull x back toward d (added points toward their diagonal
// projection) by bisection until W_p(d, x) <= eps.
void project_ball(const PersistenceDiagram& d, PersistenceDiagram& x, double eps,
                  metric::MetricParams p) {
  if (metric::distance(d, x, p, tracking_cost(d, x, p)) <= eps) return;
  PersistenceDiagram base = x;
  for (std::size_t j = 0; j < base.points.size(); ++j) {
    if (j < d.points.size()) {
      base.points[j] = d.points[j];
    } else {
      const double mid = 0.5 * (x.points[j].birth + x.points[j].death);
      base.points[j] = {mid, mid};
    }
  }
  auto blend = [&](double t) {
    PersistenceDiagram y = base;
    for (std::size_t j = 0; j < y.points.size(); ++j) {
      y.points[j].birth += t * (x.points[j].birth - base.points[j].birth);
      y.points[j].death += t * (x.points[j].death - base.points[j].death);
      y.points[j] = project_feasible(y.points[j]);
    }
    return y;
  };
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 30; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto y = blend(mid);
    (metric::distance(d, y, p, tracking_cost(d, y, p)) <= eps ? lo : hi) = mid;
  }
  x = blend(lo);
}

}  // namespace

DiagramPoint project_feasible(DiagramPoint x) {
  if (x.birth > x.death) {
    const double mid = 0.5 * (x.birth + x.death);
    x = {mid, mid};
  }
  x.birth = std::max(x.birth, 0.0);
  x.death = std::max(x.death, x.birth);
  return x;
}

std::vector<double> SrnClassifier::logits(const PersistenceDiagram& d) const {
  return model_.logits(d);
}

std::vector<DiagramPoint> SrnClassifier::input_gradient(const PersistenceDiagram& d,
                                                        std::span<const double> dlogits) const {
  const auto v = model_.vectorize(d);
  const auto gv = lipnet::input_gradient(model_.net, v, dlogits);
  return stablerank::stable_rank_backward(d, model_.p, model_.rep, model_.dim, gv).points;
}

std::vector<double> DeepSetClassifier::logits(const PersistenceDiagram& d) const {
  return baseline::deepset_forward(net_, d);
}

std::vector<DiagramPoint> DeepSetClassifier::input_gradient(
    const PersistenceDiagram& d, std::span<const double> dlogits) const {
  baseline::DeepSetCache cache;
  baseline::deepset_forward(net_, d, cache);
  return baseline::deepset_backward(net_, cache, dlogits).points;
}

AttackResult attack(const Classifier& classifier, const PersistenceDiagram& d, int true_class,
                    const AttackConfig& config) {
  validate(config);
  const auto p = config.p;

  double scale = 0.0;
  double lo_birth = kInf;
  double hi_birth = 0.0;
  for (const auto& pt : d.points) {
    scale = std::max(scale, pt.death);
    lo_birth = std::min(lo_birth, pt.birth);
    hi_birth = std::max(hi_birth, pt.birth);
  }
  if (!(scale > 0.0)) scale = 1.0;
  if (d.points.empty()) lo_birth = hi_birth = 0.0;

  auto constrain = [&](PersistenceDiagram& x) {
    if (!config.budget) return;
    if (p.is_infinite()) {
      project_box(d, x, *config.budget);
    } else {
      project_ball(d, x, *config.budget, p);
    }
  };
  Rng rng(config.seed);
  std::vector<PersistenceDiagram> starts;
  for (std::size_t r = 0; r <= config.restarts; ++r) {
    PersistenceDiagram init = d;
    const double lo = r == 0 ? lo_birth : 0.0;
    const double hi = r == 0 ? hi_birth : config.init_spread * scale;
    for (std::size_t k = 0; k < config.n_added; ++k) {
      const double a = lo < hi ? rng.uniform(lo, hi) : lo;
      init.points.push_back(project_feasible({a, a + config.init_offset}));
    }
    constrain(init);
    starts.push_back(std::move(init));
  }

  AttackResult best;
  best.distance = kInf;
  AttackResult last;
  std::size_t total_iterations = 0;

  for (std::size_t run = 0; run < config.lambdas.size() * starts.size(); ++run) {
    const double lambda = config.lambdas[run / starts.size()];
    PersistenceDiagram x = starts[run % starts.size()];
    bool aborted = false;
    std::size_t k = 0;
    for (;; ++k) {
      const auto logits = classifier.logits(x);
      const int pred = lipnet::predict(logits);
      const double bound = tracking_cost(d, x, p);
      double exact = -1.0;
      auto exact_distance = [&] {
        if (exact < 0.0) exact = metric::distance(d, x, p, bound);
        return exact;
      };
      if (pred != true_class) {
        const double dist = exact_distance();
        const bool within = !config.budget || dist <= *config.budget;
        if (within && dist < best.distance) {
          best.adversarial = x;
          best.distance = dist;
          best.success = true;
          best.predicted = pred;
          best.lambda = lambda;
        }
        if (within && config.budget) break;
      }
      if (k == config.steps) break;

      const double frac = config.steps > 0 ? static_cast<double>(k) / config.steps : 0.0;
      double tau = 1.0;
      if (p.is_infinite()) {
        const double t = config.temperature_start *
                         std::pow(config.temperature_end / config.temperature_start, frac);
        tau = std::max(t * exact_distance(), 1e-12 * scale);
      }
      const auto dist_term = distance_term(d, x, p, tau, bound);
      const auto ce = cross_entropy_gradient(logits, true_class);
      const auto gce = classifier.input_gradient(x, ce);

      std::vector<DiagramPoint> g(x.points.size());
      double norm = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        g[j].birth = dist_term.grad[j].birth - lambda * gce[j].birth;
        g[j].death = dist_term.grad[j].death - lambda * gce[j].death;
        norm = std::max({norm, std::abs(g[j].birth), std::abs(g[j].death)});
      }
      if (!std::isfinite(norm)) {
        aborted = true;
        break;
      }
      if (norm == 0.0) continue;
      const double eta = config.step_size * scale * (1.0 - frac) / norm;
      for (std::size_t j = 0; j < g.size(); ++j) {
        x.points[j] = project_feasible(
            {x.points[j].birth - eta * g[j].birth, x.points[j].death - eta * g[j].death});
      }
      constrain(x);
    }
    total_iterations += k;
    last.adversarial = x;
    last.distance = metric::distance(d, x, p, tracking_cost(d, x, p));
    last.predicted = lipnet::predict(classifier.logits(x));
    last.lambda = lambda;
    last.aborted = last.aborted || aborted;
    if (best.success && config.budget) break;
  }

  AttackResult out = best.success ? best : last;
  out.iterations = total_iterations;
  out.aborted = last.aborted;
  if (p.is_infinite() && out.distance > 0.0) {
    const double tau = std::max(config.temperature_end * out.distance, 1e-12 * scale);
    const double bound = tracking_cost(d, out.adversarial, p);
    out.surrogate_gap =
        std::abs(distance_term(d, out.adversarial, p, tau, bound).value - out.distance);
  }
  return out;
}

double empirical_robust_accuracy(const Classifier& classifier,
                                 std::span<const PersistenceDiagram> diagrams,
                                 std::span<const int> labels, double eps,
                                 const AttackConfig& config, std::vector<AttackRecord>* records) {
  if (diagrams.size() != labels.size()) {
    throw ParameterError("empirical_robust_accuracy: diagrams and labels differ in count");
  }
  if (!(eps >= 0.0)) throw ParameterError("empirical_robust_accuracy: eps must be >= 0");
  if (records != nullptr) records->clear();
  std::size_t robust = 0;
  for (std::size_t i = 0; i < diagrams.size(); ++i) {
    AttackRecord rec;
    rec.sample_id = i;
    rec.clean_correct = lipnet::predict(classifier.logits(diagrams[i])) == labels[i];
    if (rec.clean_correct && eps > 0.0) {
      AttackConfig cfg = config;
      cfg.budget = eps;
      cfg.seed = mix_seed(config.seed, i);
      const auto res = attack(classifier, diagrams[i], labels[i], cfg);
      rec.success = res.success;
      rec.distance = res.distance;
      rec.iterations = res.iterations;
    }
    if (rec.clean_correct && !rec.success) ++robust;
    if (records != nullptr) records->push_back(rec);
  }
  return diagrams.empty() ? 0.0
                          : static_cast<double>(robust) / static_cast<double>(diagrams.size());
}

std::vector<double> robust_accuracy_curve(const Classifier& classifier,
                                          std::span<const PersistenceDiagram> diagrams,
                                          std::span<const int> labels,
                                          std::span<const double> eps_grid,
                                          const AttackConfig& config) {
  if (!std::is_sorted(eps_grid.begin(), eps_grid.end())) {
    throw ParameterError("robust_accuracy_curve: eps grid must be ascending");
  }
  if (diagrams.size() != labels.size()) {
    throw ParameterError("robust_accuracy_curve: diagrams and labels differ in count");
  }
  std::vector<std::size_t> robust(eps_grid.size(), 0);
  for (std::size_t i = 0; i < diagrams.size(); ++i) {
    if (lipnet::predict(classifier.logits(diagrams[i])) != labels[i]) continue;
    bool broken = false;
    for (std::size_t e = 0; e < eps_grid.size(); ++e) {
      if (!broken && eps_grid[e] > 0.0) {
        AttackConfig cfg = config;
        cfg.budget = eps_grid[e];
        cfg.seed = mix_seed(config.seed, i);
        broken = attack(classifier, diagrams[i], labels[i], cfg).success;
      }
      if (!broken) ++robust[e];
    }
  }
  std::vector<double> out(eps_grid.size(), 0.0);
  if (diagrams.empty()) return out;
  for (std::size_t e = 0; e < out.size(); ++e) {
    out[e] = static_cast<double>(robust[e]) / static_cast<double>(diagrams.size());
  }
  return out;
}

}  // namespace srn::attack
