#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "srn/types.hpp"

namespace srn::complex {

/// 2D Delaunay triangulation. Vertices are the distinct input points in
/// lexicographic (x, y) order; edges and triangles hold sorted vertex indices
/// and are themselves sorted lexicographically.
struct Triangulation {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> triangles;
};

/// Simplex of dimension 0, 1 or 2. Unused vertex slots hold -1.
struct Simplex {
  std::array<int, 3> vertices{-1, -1, -1};
  int dim = 0;
  double value = 0.0;
};

/// Simplices ordered by (value, dim, vertices). Filtration values are radii,
/// not squared radii.
struct FilteredComplex {
  std::vector<Point2> vertices;
  std::vector<Simplex> simplices;
};

/// Triangulates the cloud after removing exact duplicates. Cocircular
/// configurations are resolved by symbolic perturbation in vertex-index order,
/// so the output is unique. Collinear input yields a path of edges and no
/// triangles; fewer than two distinct points yield vertices only.
Triangulation delaunay_2d(const PointCloud& cloud);

/// Alpha filtration on a Delaunay triangulation: vertices at 0, triangles at
/// their circumradius, edges at half their length when the diametral disk
/// holds no opposite vertex and otherwise at the smallest value of an
/// adjacent triangle.
FilteredComplex alpha_filtration(const Triangulation& tri);

/// Degree-q persistence over Z/2 (q in {0, 1}). Zero-length pairs and the
/// essential classes are dropped. Throws ContractError when the complex is
/// unsorted, a face is missing, or a face enters after its coface.
PersistenceDiagram persistence(const FilteredComplex& fc, int degree);

/// Multiplies every coordinate by `factor` (> 0).
PersistenceDiagram scale_diagram(const PersistenceDiagram& d, double factor);

/// delaunay_2d -> alpha_filtration -> persistence.
PersistenceDiagram alpha_persistence(const PointCloud& cloud, int degree);

/// Circumradius of a non-degenerate triangle.
double circumradius(const Point2& a, const Point2& b, const Point2& c);

/// Throws ContractError unless the complex is sorted by (value, dim) and every
/// face is present earlier with a value no larger than its coface.
void validate_filtration(const FilteredComplex& fc);

}  // namespace srn::complex
