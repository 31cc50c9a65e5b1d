#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "srn/matrix.hpp"
#include "srn/metric.hpp"
#include "srn/types.hpp"

namespace srn::stablerank {

struct GaussianComponent {
  double weight = 1.0;
  double mean = 0.0;
  double stddev = 1.0;
};

/// Strictly increasing reparameterization F of the filtration scale, either
/// the identity or F(t) = integral_0^t f with f a positive Gaussian mixture:
///   F(t) = sum_k w_k (Phi((t - mu_k) / s_k) - Phi(-mu_k / s_k)).
/// The mixture F is bounded, so it is not onto R>=0; only monotonicity is used.
class Reparameterization {
 public:
  enum class Kind { identity, gaussian_mixture };

  static Reparameterization identity() { return Reparameterization(); }
  /// Throws ParameterError on an empty list or non-positive weight/stddev.
  static Reparameterization gaussian_mixture(std::vector<GaussianComponent> components);

  Kind kind() const { return kind_; }
  bool is_identity() const { return kind_ == Kind::identity; }
  const std::vector<GaussianComponent>& components() const { return components_; }

  /// F(t); t must be >= 0.
  double operator()(double t) const;
  /// f(t) = F'(t).
  double density(double t) const;
  /// Accumulates scale * dF(t)/d(weight, mean, stddev) into `out`, one entry
  /// per component. No-op for the identity.
  void accumulate_parameter_gradient(double t, double scale,
                                     std::span<GaussianComponent> out) const;

 private:
  Reparameterization() = default;
  Kind kind_ = Kind::identity;
  std::vector<GaussianComponent> components_;
};

double evaluate_F(const Reparameterization& rep, double t);

/// Certified Lipschitz constant K of F: 1 for the identity, and
/// sum_k w_k / (s_k sqrt(2 pi)) >= sup f for a mixture.
double lipschitz_bound(const Reparameterization& rep);

struct StableRankVector {
  std::vector<double> values;
  double p = 1.0;
  std::size_t rank = 0;
  /// True when r_{p,F}(D) had more than N entries and was cut to the first N.
  bool truncated = false;
};

/// r_{p,F}(D) as a length-N vector. With lifetimes l_1 <= ... <= l_m,
///   t_j = 2^((1-p)/p) ||(l_1, ..., l_j)||_p,   r_i = t_{m-i},   r_m = 0,
/// padded with zeros. When m > N - 1 the vector is the first N coordinates of
/// the full one, which keeps the K-Lipschitz bound in L_inf.
/// Throws ContractError unless every point satisfies 0 <= birth <= death < inf.
StableRankVector stable_rank_vector(const PersistenceDiagram& d, metric::MetricParams p,
                                    const Reparameterization& rep, std::size_t dim);

struct VectorizedDataset {
  Matrix vectors;  // one row per diagram
  std::vector<std::size_t> truncated_rows;
};

VectorizedDataset vectorize_dataset(std::span<const PersistenceDiagram> diagrams,
                                    metric::MetricParams p, const Reparameterization& rep,
                                    std::size_t dim);

/// 1 + the largest rank in the dataset: the smallest N with no truncation.
std::size_t required_dimension(std::span<const PersistenceDiagram> diagrams);

struct StableRankGradient {
  std::vector<DiagramPoint> points;           // d/d(birth, death) per input point
  std::vector<GaussianComponent> reparam;     // d/d(weight, mean, stddev), mixture only
};

/// Reverse-mode derivative of <upstream, stable_rank_vector(d)>. Ties in the
/// lifetime order and the p = inf max use the same order as the forward pass.
StableRankGradient stable_rank_backward(const PersistenceDiagram& d, metric::MetricParams p,
                                        const Reparameterization& rep, std::size_t dim,
                                        std::span<const double> upstream);

}  // namespace srn::stablerank
