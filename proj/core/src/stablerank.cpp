#include "srn/stablerank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "srn/errors.hpp"

namespace srn::stablerank {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

void validate_point(const DiagramPoint& x) {
  if (!std::isfinite(x.birth) || !std::isfinite(x.death) || x.birth < 0.0 ||
      x.birth > x.death) {
    throw ContractError("stable rank: diagram points must satisfy 0 <= birth <= death < inf");
  }
}

// Lifetimes and the stable ascending order of the points by lifetime.
struct Lifetimes {
  std::vector<double> value;      // per input point
  std::vector<std::size_t> order;  // ascending lifetime, ties by index
};

Lifetimes lifetimes(const PersistenceDiagram& d, const Reparameterization& rep) {
  Lifetimes out;
  out.value.reserve(d.rank());
  for (const auto& x : d.points) {
    validate_point(x);
    out.value.push_back(rep(x.death) - rep(x.birth));
  }
  out.order.resize(d.rank());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return out.value[a] < out.value[b]; });
  return out;
}

double norm_factor(double p) { return std::pow(2.0, (1.0 - p) / p); }

}  // namespace

Reparameterization Reparameterization::gaussian_mixture(std::vector<GaussianComponent> components) {
  if (components.empty()) throw ParameterError("gaussian mixture: no components");
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !(c.stddev > 0.0) || !std::isfinite(c.weight) ||
        !std::isfinite(c.stddev) || !std::isfinite(c.mean)) {
      throw ParameterError("gaussian mixture: weights and stddevs must be positive and finite");
    }
  }
  Reparameterization rep;
  rep.kind_ = Kind::gaussian_mixture;
  rep.components_ = std::move(components);
  return rep;
}

double Reparameterization::operator()(double t) const {
  if (kind_ == Kind::identity) return t;
  double sum = 0.0;
  for (const auto& c : components_) {
    sum += c.weight * (normal_cdf((t - c.mean) / c.stddev) - normal_cdf(-c.mean / c.stddev));
  }
  return sum;
}

double Reparameterization::density(double t) const {
  if (kind_ == Kind::identity) return 1.0;
  double sum = 0.0;
  for (const auto& c : components_) {
    sum += c.weight * normal_pdf((t - c.mean) / c.stddev) / c.stddev;
  }
  return sum;
}

void Reparameterization::accumulate_parameter_gradient(double t, double scale,
                                                       std::span<GaussianComponent> out) const {
  if (kind_ == Kind::identity) return;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    const double zt = (t - c.mean) / c.stddev;
    const double z0 = -c.mean / c.stddev;
    const double pt = normal_pdf(zt);
    const double p0 = normal_pdf(z0);
    out[k].weight += scale * (normal_cdf(zt) - normal_cdf(z0));
    out[k].mean += scale * c.weight / c.stddev * (p0 - pt);
    out[k].stddev += scale * c.weight / c.stddev * (z0 * p0 - zt * pt);
  }
}

double evaluate_F(const Reparameterization& rep, double t) {
  if (!(t >= 0.0)) throw ParameterError("evaluate_F: t must be >= 0");
  return rep(t);
}

double lipschitz_bound(const Reparameterization& rep) {
  if (rep.is_identity()) return 1.0;
  double k = 0.0;
  for (const auto& c : rep.components()) k += c.weight * kInvSqrt2Pi / c.stddev;
  return k;
}

StableRankVector stable_rank_vector(const PersistenceDiagram& d, metric::MetricParams p,
                                    const Reparameterization& rep, std::size_t dim) {
  if (dim == 0) throw ParameterError("stable_rank_vector: dimension must be >= 1");
  const Lifetimes life = lifetimes(d, rep);
  const std::size_t m = d.rank();

  // t_j for j = 1..m.
  std::vector<double> t(m + 1, 0.0);
  if (p.is_infinite()) {
    for (std::size_t j = 1; j <= m; ++j) t[j] = 0.5 * life.value[life.order[j - 1]];
  } else {
    const double q = p.p();
    const double c = norm_factor(q);
    double acc = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      const double l = life.value[life.order[j - 1]];
      acc += q == 1.0 ? l : std::pow(l, q);
      t[j] = c * (q == 1.0 ? acc : std::pow(acc, 1.0 / q));
    }
  }

  StableRankVector out;
  out.p = p.p();
  out.rank = m;
  out.truncated = m + 1 > dim;
  out.values.assign(dim, 0.0);
  for (std::size_t i = 0; i < std::min(m, dim); ++i) out.values[i] = t[m - i];
  return out;
}

VectorizedDataset vectorize_dataset(std::span<const PersistenceDiagram> diagrams,
                                    metric::MetricParams p, const Reparameterization& rep,
                                    std::size_t dim) {
  VectorizedDataset out;
  out.vectors = Matrix(diagrams.size(), dim);
  for (std::size_t i = 0; i < diagrams.size(); ++i) {
    const StableRankVector v = stable_rank_vector(diagrams[i], p, rep, dim);
    std::copy(v.values.begin(), v.values.end(), out.vectors.row(i).begin());
    if (v.truncated) out.truncated_rows.push_back(i);
  }
  return out;
}

std::size_t required_dimension(std::span<const PersistenceDiagram> diagrams) {
  std::size_t max_rank = 0;
  for (const auto& d : diagrams) max_rank = std::max(max_rank, d.rank());
  return max_rank + 1;
}

StableRankGradient stable_rank_backward(const PersistenceDiagram& d, metric::MetricParams p,
                                        const Reparameterization& rep, std::size_t dim,
                                        std::span<const double> upstream) {
  if (upstream.size() != dim) {
    throw ContractError("stable_rank_backward: upstream gradient has length " +
                        std::to_string(upstream.size()) + ", expected " + std::to_string(dim));
  }
  const Lifetimes life = lifetimes(d, rep);
  const std::size_t m = d.rank();

  // g_t[j] = dL/dt_j, from r_i = t_{m-i} for i < min(m, dim).
  std::vector<double> g_t(m + 1, 0.0);
  for (std::size_t i = 0; i < std::min(m, dim); ++i) g_t[m - i] = upstream[i];

  // dL/dl for sorted position k (1-based).
  std::vector<double> g_sorted(m + 1, 0.0);
  if (p.is_infinite()) {
    for (std::size_t j = 1; j <= m; ++j) g_sorted[j] = 0.5 * g_t[j];
  } else {
    const double q = p.p();
    const double c = norm_factor(q);
    // dt_j/dl_k = c S_j^(1/p - 1) l_k^(p - 1) for k <= j.
    std::vector<double> prefix(m + 1, 0.0);
    for (std::size_t j = 1; j <= m; ++j) {
      prefix[j] = prefix[j - 1] + std::pow(life.value[life.order[j - 1]], q);
    }
    double suffix = 0.0;
    for (std::size_t j = m; j >= 1; --j) {
      if (prefix[j] > 0.0) suffix += g_t[j] * c * std::pow(prefix[j], 1.0 / q - 1.0);
      const double l = life.value[life.order[j - 1]];
      g_sorted[j] = q == 1.0 ? suffix : (l > 0.0 ? suffix * std::pow(l, q - 1.0) : 0.0);
    }
  }

  StableRankGradient out;
  out.points.assign(m, DiagramPoint{0.0, 0.0});
  if (!rep.is_identity()) out.reparam.assign(rep.components().size(), GaussianComponent{0, 0, 0});
  for (std::size_t j = 1; j <= m; ++j) {
    const std::size_t idx = life.order[j - 1];
    const double g = g_sorted[j];
    if (g == 0.0) continue;
    const auto& x = d.points[idx];
    out.points[idx].birth = -g * rep.density(x.birth);
    out.points[idx].death = g * rep.density(x.death);
    if (!rep.is_identity()) {
      rep.accumulate_parameter_gradient(x.death, g, out.reparam);
      rep.accumulate_parameter_gradient(x.birth, -g, out.reparam);
    }
  }
  return out;
}

}  // namespace srn::stablerank
