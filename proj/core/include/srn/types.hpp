#pragma once

#include <cstddef>
#include <vector>

namespace srn {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

using PointCloud = std::vector<Point2>;

struct DiagramPoint {
  double birth = 0.0;
  double death = 0.0;

  double persistence() const { return death - birth; }
  friend bool operator==(const DiagramPoint&, const DiagramPoint&) = default;
};

/// Finite multiset of (birth, death) pairs in homology degree `degree`.
/// Points at infinity are never stored.
struct PersistenceDiagram {
  int degree = 1;
  std::vector<DiagramPoint> points;

  std::size_t rank() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

}  // namespace srn
