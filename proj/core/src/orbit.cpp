#include "srn/orbit.hpp"

#include <cmath>
#include <string>

#include "srn/errors.hpp"
#include "srn/rng.hpp"

namespace srn::orbit {

namespace {

inline double mod1(double v) { return v - std::floor(v); }

bool in_unit_square(const Point2& p) {
  return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
}

}  // namespace

PointCloud generate_orbit(const OrbitSpec& spec) {
  if (!(spec.r > 0.0) || !std::isfinite(spec.r)) {
    throw ParameterError("orbit: r must be a positive finite number, got " +
                         std::to_string(spec.r));
  }
  if (spec.n_points == 0) throw ParameterError("orbit: n_points must be >= 1");

  Point2 p;
  if (spec.start) {
    if (!in_unit_square(*spec.start)) {
      throw ParameterError("orbit: start position must lie in [0,1]^2");
    }
    // 1.0 is a valid start but not a valid mod-1 residue.
    p = {mod1(spec.start->x), mod1(spec.start->y)};
  } else {
    Rng rng(spec.seed);
    p.x = rng.uniform();
    p.y = rng.uniform();
  }

  PointCloud cloud;
  cloud.reserve(spec.n_points);
  cloud.push_back(p);
  for (std::size_t n = 1; n < spec.n_points; ++n) {
    p.x = mod1(p.x + spec.r * p.y * (1.0 - p.y));
    p.y = mod1(p.y + spec.r * p.x * (1.0 - p.x));
    cloud.push_back(p);
  }
  return cloud;
}

std::uint64_t sample_seed(std::uint64_t seed, int label, std::size_t index) {
  return mix_seed(seed, static_cast<std::uint64_t>(label) + 1, index);
}

LabeledDataset generate_dataset(std::size_t per_class, std::size_t n_points,
                                std::uint64_t seed) {
  if (per_class == 0) throw ParameterError("dataset: per_class must be >= 1");
  if (n_points == 0) throw ParameterError("dataset: n_points must be >= 1");

  LabeledDataset ds;
  ds.class_params.assign(kClassParams.begin(), kClassParams.end());
  ds.seed = seed;
  ds.per_class = per_class;
  ds.n_points = n_points;
  ds.samples.reserve(per_class * kClassParams.size());
  for (std::size_t c = 0; c < kClassParams.size(); ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const int label = static_cast<int>(c);
      OrbitSpec spec{kClassParams[c], n_points, sample_seed(seed, label, i), std::nullopt};
      ds.samples.push_back({generate_orbit(spec), label});
    }
  }
  return ds;
}

}  // namespace srn::orbit
