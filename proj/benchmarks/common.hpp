#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "srn/complex.hpp"
#include "srn/orbit.hpp"
#include "srn/types.hpp"

namespace srn::bench {

inline PointCloud orbit_cloud(std::size_t n, double r = 4.1, std::uint64_t seed = 7) {
  return orbit::generate_orbit({r, n, seed, std::nullopt});
}

/// H1 diagram of an orbit, in the pipeline's x1000 units.
inline PersistenceDiagram orbit_diagram(std::size_t n, double r = 4.1, std::uint64_t seed = 7) {
  return complex::scale_diagram(complex::alpha_persistence(orbit_cloud(n, r, seed), 1), 1000.0);
}

}  // namespace srn::bench
