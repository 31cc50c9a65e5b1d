#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "srn/types.hpp"

namespace srn::orbit {

/// The five dynamics parameters that define the classes, in label order.
inline constexpr std::array<double, 5> kClassParams{2.5, 3.5, 4.0, 4.1, 4.3};

struct OrbitSpec {
  double r = 0.0;
  std::size_t n_points = 0;
  std::uint64_t seed = 0;
  /// Initial position; drawn uniformly from [0,1)^2 with `seed` when absent.
  std::optional<Point2> start;
};

/// Iterates
///   x' = (x + r y (1 - y)) mod 1
///   y' = (y + r x' (1 - x')) mod 1
/// starting at the start position, which is the first returned point.
/// Throws ParameterError for r <= 0, n_points == 0, or a start outside [0,1]^2.
PointCloud generate_orbit(const OrbitSpec& spec);

struct Sample {
  PointCloud cloud;
  int label = 0;
};

struct LabeledDataset {
  std::vector<Sample> samples;
  std::vector<double> class_params;
  std::uint64_t seed = 0;
  std::size_t per_class = 0;
  std::size_t n_points = 0;
};

/// Seed of sample `index` within class `label`. Each sample can be
/// regenerated on its own from (seed, label, index).
std::uint64_t sample_seed(std::uint64_t seed, int label, std::size_t index);

/// Class-major dataset: all samples of label 0 first, then label 1, ...
LabeledDataset generate_dataset(std::size_t per_class, std::size_t n_points,
                                std::uint64_t seed);

}  // namespace srn::orbit
