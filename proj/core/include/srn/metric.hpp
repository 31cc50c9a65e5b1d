#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "srn/types.hpp"

namespace srn::metric {

/// The exponent p in [1, inf]. Infinity selects the bottleneck distance.
class MetricParams {
 public:
  /// Throws ParameterError unless p >= 1 (infinity allowed).
  explicit MetricParams(double p);
  static MetricParams infinity() { return MetricParams(std::numeric_limits<double>::infinity()); }

  double p() const { return p_; }
  bool is_infinite() const { return p_ == std::numeric_limits<double>::infinity(); }

 private:
  double p_;
};

/// Partial matching between diagrams; unmatched points go to the diagonal.
struct Matching {
  std::vector<std::pair<int, int>> pairs;  // (index in D, index in D'), sorted
  std::vector<int> unmatched_left;
  std::vector<int> unmatched_right;
};

/// ||x - y||_p on the plane.
double point_distance(const DiagramPoint& x, const DiagramPoint& y, MetricParams p);

/// Distance of (a, b) to the diagonal in the same norm: attained at the
/// midpoint, ((b - a) / 2) * 2^(1/p), and (b - a) / 2 for p = inf.
double diagonal_distance(const DiagramPoint& x, MetricParams p);

/// Exact p-Wasserstein distance (finite p) with d_p as the inner point metric.
/// Solved as a dense (m+n) x (m+n) assignment problem.
double wasserstein(const PersistenceDiagram& d1, const PersistenceDiagram& d2, double p);

/// Exact bottleneck distance via binary search over candidate values with a
/// bipartite perfect-matching test at each threshold.
double bottleneck(const PersistenceDiagram& d1, const PersistenceDiagram& d2);

/// wasserstein() or bottleneck() depending on p.
///
/// `upper_bound`, when given, should be at least the distance (for example
/// the cost of a known matching). Pairs farther apart than the bound are
/// then never examined, which is much faster for nearby diagrams. A bound
/// that is too small is detected and ignored.
double distance(const PersistenceDiagram& d1, const PersistenceDiagram& d2, MetricParams p,
                std::optional<double> upper_bound = std::nullopt);

/// A matching realizing distance(d1, d2, p). For p = inf it is the
/// bottleneck-feasible matching of least total d_inf cost. `upper_bound` as
/// for distance().
Matching optimal_matching(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                          MetricParams p, std::optional<double> upper_bound = std::nullopt);

/// Cost of a given matching: the outer p-norm of matched and diagonal costs.
double matching_cost(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                     const Matching& m, MetricParams p);

/// Largest rank(D) + rank(D') accepted by brute_force_wasserstein.
inline constexpr std::size_t kBruteForceLimit = 8;

/// Reference value by enumerating every partial injection. Throws
/// SizeLimitError when rank(D) + rank(D') exceeds kBruteForceLimit.
double brute_force_wasserstein(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                               MetricParams p);

/// Minimum-cost perfect assignment on a dense square cost matrix (row-major).
/// Returns the column assigned to each row. Shortest augmenting paths with
/// potentials; O(n^3).
std::vector<int> solve_assignment(const std::vector<double>& cost, std::size_t n);

}  // namespace srn::metric
