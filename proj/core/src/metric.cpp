#include "srn/metric.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <string>

#include "srn/errors.hpp"

namespace srn::metric {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(const PersistenceDiagram& d, const char* who) {
  for (const auto& x : d.points) {
    if (!std::isfinite(x.birth) || !std::isfinite(x.death)) {
      throw ContractError(std::string(who) + ": diagram has a point at infinity or NaN");
    }
  }
}

// d_p(x, y)^p without the root.
double point_cost_pow(const DiagramPoint& x, const DiagramPoint& y, double p) {
  return std::pow(std::abs(x.birth - y.birth), p) + std::pow(std::abs(x.death - y.death), p);
}

// d_p(x, Delta)^p = 2 ((b - a) / 2)^p.
double diagonal_cost_pow(const DiagramPoint& x, double p) {
  return 2.0 * std::pow(0.5 * std::abs(x.death - x.birth), p);
}

double linf(const DiagramPoint& x, const DiagramPoint& y) {
  return std::max(std::abs(x.birth - y.birth), std::abs(x.death - y.death));
}

double diagonal_linf(const DiagramPoint& x) { return 0.5 * std::abs(x.death - x.birth); }

// Augmented square cost matrix. Rows: points of d1, then one diagonal slot per
// point of d2. Columns: points of d2, then one diagonal slot per point of d1.
// A point may use any diagonal slot of the opposite side at its own diagonal
// cost; diagonal-to-diagonal is free. This has the same optimum as pinning
// each point to its own slot.
template <class PairCost, class DiagCost>
std::vector<double> augmented_costs(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                                    PairCost pair_cost, DiagCost diag_cost) {
  const std::size_t m = d1.rank();
  const std::size_t n = d2.rank();
  const std::size_t size = m + n;
  std::vector<double> cost(size * size, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double to_diag = diag_cost(d1.points[i]);
    for (std::size_t j = 0; j < n; ++j) cost[i * size + j] = pair_cost(d1.points[i], d2.points[j]);
    for (std::size_t j = n; j < size; ++j) cost[i * size + j] = to_diag;
  }
  for (std::size_t i = m; i < size; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i * size + j] = diag_cost(d2.points[j]);
  }
  return cost;
}

Matching decode(const std::vector<int>& assignment, std::size_t m, std::size_t n) {
  Matching out;
  std::vector<bool> right_taken(n, false);
  for (std::size_t i = 0; i < m; ++i) {
    const int j = assignment[i];
    if (j < static_cast<int>(n)) {
      out.pairs.emplace_back(static_cast<int>(i), j);
      right_taken[j] = true;
    } else {
      out.unmatched_left.push_back(static_cast<int>(i));
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!right_taken[j]) out.unmatched_right.push_back(static_cast<int>(j));
  }
  return out;
}

// Hopcroft-Karp perfect matching test on the threshold graph of the augmented
// bottleneck instance.
class ThresholdMatcher {
 public:
  ThresholdMatcher(const PersistenceDiagram& d1, const PersistenceDiagram& d2)
      : m_(d1.rank()), n_(d2.rank()), size_(m_ + n_), pair_(m_ * n_), diag1_(m_), diag2_(n_) {
    for (std::size_t i = 0; i < m_; ++i) {
      diag1_[i] = diagonal_linf(d1.points[i]);
      for (std::size_t j = 0; j < n_; ++j) pair_[i * n_ + j] = linf(d1.points[i], d2.points[j]);
    }
    for (std::size_t j = 0; j < n_; ++j) diag2_[j] = diagonal_linf(d2.points[j]);
  }

  std::vector<double> candidates() const {
    std::vector<double> c;
    c.reserve(pair_.size() + size_ + 1);
    c.push_back(0.0);
    c.insert(c.end(), pair_.begin(), pair_.end());
    c.insert(c.end(), diag1_.begin(), diag1_.end());
    c.insert(c.end(), diag2_.begin(), diag2_.end());
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
  }

  bool feasible(double delta) {
    build(delta);
    return max_matching() == size_;
  }

 private:
  void build(double delta) {
    adj_.assign(size_, {});
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (pair_[i * n_ + j] <= delta) adj_[i].push_back(static_cast<int>(j));
      }
      if (diag1_[i] <= delta) {
        for (std::size_t j = n_; j < size_; ++j) adj_[i].push_back(static_cast<int>(j));
      }
    }
    for (std::size_t i = m_; i < size_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (diag2_[j] <= delta) adj_[i].push_back(static_cast<int>(j));
      }
      for (std::size_t j = n_; j < size_; ++j) adj_[i].push_back(static_cast<int>(j));
    }
  }

  bool bfs() {
    std::queue<int> q;
    bool found = false;
    for (std::size_t u = 0; u < size_; ++u) {
      if (match_left_[u] < 0) {
        dist_[u] = 0;
        q.push(static_cast<int>(u));
      } else {
        dist_[u] = -1;
      }
    }
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj_[u]) {
        const int w = match_right_[v];
        if (w < 0) {
          found = true;
        } else if (dist_[w] < 0) {
          dist_[w] = dist_[u] + 1;
          q.push(w);
        }
      }
    }
    return found;
  }

  bool dfs(int u) {
    for (; iter_[u] < adj_[u].size(); ++iter_[u]) {
      const int v = adj_[u][iter_[u]];
      const int w = match_right_[v];
      if (w < 0 || (dist_[w] == dist_[u] + 1 && dfs(w))) {
        match_left_[u] = v;
        match_right_[v] = u;
        return true;
      }
    }
    dist_[u] = -1;
    return false;
  }

  std::size_t max_matching() {
    match_left_.assign(size_, -1);
    match_right_.assign(size_, -1);
    dist_.assign(size_, -1);
    std::size_t matched = 0;
    while (bfs()) {
      iter_.assign(size_, 0);
      for (std::size_t u = 0; u < size_; ++u) {
        if (match_left_[u] < 0 && dfs(static_cast<int>(u))) ++matched;
      }
    }
    return matched;
  }

  std::size_t m_, n_, size_;
  std::vector<double> pair_, diag1_, diag2_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> match_left_, match_right_, dist_;
  std::vector<std::size_t> iter_;
};

}  // namespace

MetricParams::MetricParams(double p) : p_(p) {
  if (std::isnan(p) || p < 1.0) {
    throw ParameterError("metric: p must lie in [1, inf], got " + std::to_string(p));
  }
}

double point_distance(const DiagramPoint& x, const DiagramPoint& y, MetricParams p) {
  if (p.is_infinite()) return linf(x, y);
  if (p.p() == 1.0) return std::abs(x.birth - y.birth) + std::abs(x.death - y.death);
  return std::pow(point_cost_pow(x, y, p.p()), 1.0 / p.p());
}

double diagonal_distance(const DiagramPoint& x, MetricParams p) {
  const double half = diagonal_linf(x);
  if (p.is_infinite()) return half;
  return half * std::pow(2.0, 1.0 / p.p());
}

std::vector<int> solve_assignment(const std::vector<double>& cost, std::size_t n) {
  // 1-based potentials formulation; column 0 is a virtual root.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> owner(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = static_cast<int>(i);
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = static_cast<std::size_t>(owner[j0]);
      double delta = kInf;
      std::size_t j1 = 0;
      const double* row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<int>(j0);
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[static_cast<std::size_t>(owner[j])] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = static_cast<std::size_t>(way[j0]);
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    assignment[static_cast<std::size_t>(owner[j]) - 1] = static_cast<int>(j) - 1;
  }
  return assignment;
}

double matching_cost(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                     const Matching& m, MetricParams p) {
  if (p.is_infinite()) {
    double worst = 0.0;
    for (const auto& [i, j] : m.pairs) worst = std::max(worst, linf(d1.points[i], d2.points[j]));
    for (int i : m.unmatched_left) worst = std::max(worst, diagonal_linf(d1.points[i]));
    for (int j : m.unmatched_right) worst = std::max(worst, diagonal_linf(d2.points[j]));
    return worst;
  }
  const double q = p.p();
  double sum = 0.0;
  for (const auto& [i, j] : m.pairs) sum += point_cost_pow(d1.points[i], d2.points[j], q);
  for (int i : m.unmatched_left) sum += diagonal_cost_pow(d1.points[i], q);
  for (int j : m.unmatched_right) sum += diagonal_cost_pow(d2.points[j], q);
  return std::pow(sum, 1.0 / q);
}

namespace {

double bottleneck_dense(const PersistenceDiagram& d1, const PersistenceDiagram& d2) {
  if (d1.rank() + d2.rank() == 0) return 0.0;
  ThresholdMatcher matcher(d1, d2);
  const std::vector<double> cand = matcher.candidates();
  // The largest candidate is always feasible (every point can reach the
  // diagonal), so search for the first feasible one.
  std::size_t lo = 0;
  std::size_t hi = cand.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (matcher.feasible(cand[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return cand[lo];
}

// For p = inf, `threshold` is the bottleneck value of this instance.
Matching matching_dense(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                        MetricParams p, double threshold) {
  const std::size_t m = d1.rank();
  const std::size_t n = d2.rank();
  if (m + n == 0) return {};
  std::vector<double> cost;
  if (p.is_infinite()) {
    // Any edge above the threshold costs more than a whole feasible matching.
    const double penalty = static_cast<double>(m + n + 1) * (threshold + 1.0);
    auto clip = [&](double c) { return c <= threshold ? c : penalty; };
    cost = augmented_costs(
        d1, d2, [&](const DiagramPoint& x, const DiagramPoint& y) { return clip(linf(x, y)); },
        [&](const DiagramPoint& x) { return clip(diagonal_linf(x)); });
  } else {
    const double q = p.p();
    cost = augmented_costs(
        d1, d2, [q](const DiagramPoint& x, const DiagramPoint& y) { return point_cost_pow(x, y, q); },
        [q](const DiagramPoint& x) { return diagonal_cost_pow(x, q); });
  }
  return decode(solve_assignment(cost, m + n), m, n);
}

// Cost of sending every point to the diagonal: an upper bound on the distance.
double all_diagonal_cost(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                         MetricParams p) {
  Matching m;
  for (std::size_t i = 0; i < d1.rank(); ++i) m.unmatched_left.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < d2.rank(); ++j) m.unmatched_right.push_back(static_cast<int>(j));
  return matching_cost(d1, d2, m, p);
}

struct Component {
  std::vector<int> left, right;
};

// Connected components of the bipartite graph whose edges are the pairs at
// distance <= bound. An optimal matching of cost <= bound never uses an edge
// above the bound, and the diagonal has unlimited capacity, so components can
// be solved independently.
std::vector<Component> components(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                                  MetricParams p, double bound) {
  const std::size_t m = d1.rank();
  const std::size_t n = d2.rank();
  std::vector<int> parent(m + n);
  for (std::size_t k = 0; k < parent.size(); ++k) parent[k] = static_cast<int>(k);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<int> by_birth(n);
  for (std::size_t j = 0; j < n; ++j) by_birth[j] = static_cast<int>(j);
  std::sort(by_birth.begin(), by_birth.end(), [&](int a, int b) {
    return d2.points[a].birth < d2.points[b].birth;
  });
  for (std::size_t i = 0; i < m; ++i) {
    const auto& x = d1.points[i];
    auto it = std::lower_bound(by_birth.begin(), by_birth.end(), x.birth - bound,
                               [&](int j, double v) { return d2.points[j].birth < v; });
    for (; it != by_birth.end() && d2.points[*it].birth <= x.birth + bound; ++it) {
      const auto& y = d2.points[*it];
      if (std::abs(x.death - y.death) > bound || point_distance(x, y, p) > bound) continue;
      parent[find(static_cast<int>(i))] = find(static_cast<int>(m) + *it);
    }
  }
  std::vector<int> slot(m + n, -1);
  std::vector<Component> out;
  for (std::size_t k = 0; k < m + n; ++k) {
    const int r = find(static_cast<int>(k));
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(out.size());
      out.emplace_back();
    }
    auto& c = out[static_cast<std::size_t>(slot[r])];
    if (k < m) {
      c.left.push_back(static_cast<int>(k));
    } else {
      c.right.push_back(static_cast<int>(k - m));
    }
  }
  return out;
}

PersistenceDiagram subset(const PersistenceDiagram& d, const std::vector<int>& idx) {
  PersistenceDiagram out;
  out.degree = d.degree;
  for (int i : idx) out.points.push_back(d.points[i]);
  return out;
}

struct Solved {
  Matching matching;
  double value = 0.0;
};

// Optimal matching through the component decomposition. Returns nullopt when
// the bound turns out to be below the distance.
std::optional<Solved> solve_bounded(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                                    MetricParams p, double bound, bool want_matching) {
  const auto comps = components(d1, d2, p, bound);
  std::vector<PersistenceDiagram> left(comps.size()), right(comps.size());
  std::vector<double> local(comps.size(), 0.0);
  double value = 0.0;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    left[c] = subset(d1, comps[c].left);
    right[c] = subset(d2, comps[c].right);
    if (p.is_infinite()) {
      local[c] = bottleneck_dense(left[c], right[c]);
      value = std::max(value, local[c]);
    }
  }
  Solved out;
  if (p.is_infinite() && !want_matching) {
    if (value > bound) return std::nullopt;
    out.value = value;
    return out;
  }
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const Matching mc = matching_dense(left[c], right[c], p, value);
    for (const auto& [i, j] : mc.pairs) {
      out.matching.pairs.emplace_back(comps[c].left[i], comps[c].right[j]);
    }
    for (int i : mc.unmatched_left) out.matching.unmatched_left.push_back(comps[c].left[i]);
    for (int j : mc.unmatched_right) out.matching.unmatched_right.push_back(comps[c].right[j]);
  }
  std::sort(out.matching.pairs.begin(), out.matching.pairs.end());
  std::sort(out.matching.unmatched_left.begin(), out.matching.unmatched_left.end());
  std::sort(out.matching.unmatched_right.begin(), out.matching.unmatched_right.end());
  out.value = p.is_infinite() ? value : matching_cost(d1, d2, out.matching, p);
  if (out.value > bound) return std::nullopt;
  return out;
}

Solved solve(const PersistenceDiagram& d1, const PersistenceDiagram& d2, MetricParams p,
             std::optional<double> upper_bound, bool want_matching) {
  if (upper_bound && *upper_bound >= 0.0) {
    if (auto s = solve_bounded(d1, d2, p, *upper_bound, want_matching)) return *s;
  }
  return *solve_bounded(d1, d2, p, all_diagonal_cost(d1, d2, p), want_matching);
}

}  // namespace

Matching optimal_matching(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                          MetricParams p, std::optional<double> upper_bound) {
  require_finite(d1, "optimal_matching");
  require_finite(d2, "optimal_matching");
  if (d1.rank() + d2.rank() == 0) return {};
  return solve(d1, d2, p, upper_bound, true).matching;
}

double wasserstein(const PersistenceDiagram& d1, const PersistenceDiagram& d2, double p) {
  const MetricParams params(p);
  if (params.is_infinite()) {
    throw ParameterError("wasserstein: p must be finite; use bottleneck() for p = inf");
  }
  return matching_cost(d1, d2, optimal_matching(d1, d2, params), params);
}

double bottleneck(const PersistenceDiagram& d1, const PersistenceDiagram& d2) {
  require_finite(d1, "bottleneck");
  require_finite(d2, "bottleneck");
  if (d1.rank() + d2.rank() == 0) return 0.0;
  return solve(d1, d2, MetricParams::infinity(), std::nullopt, false).value;
}

double distance(const PersistenceDiagram& d1, const PersistenceDiagram& d2, MetricParams p,
                std::optional<double> upper_bound) {
  require_finite(d1, "distance");
  require_finite(d2, "distance");
  if (d1.rank() + d2.rank() == 0) return 0.0;
  return solve(d1, d2, p, upper_bound, !p.is_infinite()).value;
}

double brute_force_wasserstein(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                               MetricParams p) {
  const std::size_t m = d1.rank();
  const std::size_t n = d2.rank();
  if (m + n > kBruteForceLimit) {
    throw SizeLimitError("brute_force_wasserstein: rank(D) + rank(D') = " +
                         std::to_string(m + n) + " exceeds the limit of " +
                         std::to_string(kBruteForceLimit));
  }
  require_finite(d1, "brute_force_wasserstein");
  require_finite(d2, "brute_force_wasserstein");

  const bool inf = p.is_infinite();
  const double q = p.p();
  auto pair_cost = [&](std::size_t i, std::size_t j) {
    return inf ? linf(d1.points[i], d2.points[j]) : point_cost_pow(d1.points[i], d2.points[j], q);
  };
  auto diag_cost = [&](const DiagramPoint& x) {
    return inf ? diagonal_linf(x) : diagonal_cost_pow(x, q);
  };
  auto combine = [&](double acc, double c) { return inf ? std::max(acc, c) : acc + c; };

  double best = kInf;
  // Enumerate alpha: I -> D' injective, I a subset of D, one point at a time.
  std::function<void(std::size_t, unsigned, double)> visit = [&](std::size_t i, unsigned used,
                                                                 double acc) {
    if (i == m) {
      for (std::size_t j = 0; j < n; ++j) {
        if (!(used & (1u << j))) acc = combine(acc, diag_cost(d2.points[j]));
      }
      best = std::min(best, acc);
      return;
    }
    visit(i + 1, used, combine(acc, diag_cost(d1.points[i])));
    for (std::size_t j = 0; j < n; ++j) {
      if (!(used & (1u << j))) visit(i + 1, used | (1u << j), combine(acc, pair_cost(i, j)));
    }
  };
  visit(0, 0u, 0.0);
  return inf ? best : std::pow(best, 1.0 / q);
}

}  // namespace srn::metric
