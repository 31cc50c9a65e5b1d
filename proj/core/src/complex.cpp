#include "srn/complex.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>

#include "predicates.hpp"
#include "srn/errors.hpp"

namespace srn::complex {

namespace {

using detail::incircle_sos;
using detail::orient;

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

bool lex_less(const Point2& a, const Point2& b) {
  return std::tie(a.x, a.y) < std::tie(b.x, b.y);
}

// Triangle soup with a directed-edge index, enough for incremental hull
// insertion and Lawson flips.
class Mesh {
 public:
  explicit Mesh(const std::vector<Point2>& pts) : pts_(pts) {}

  void add(int a, int b, int c) {
    assert(orient(pts_[a], pts_[b], pts_[c]) > 0);
    const int t = static_cast<int>(tris_.size());
    tris_.push_back({a, b, c});
    alive_.push_back(true);
    edges_[edge_key(a, b)] = t;
    edges_[edge_key(b, c)] = t;
    edges_[edge_key(c, a)] = t;
    pending_.emplace_back(a, b);
    pending_.emplace_back(b, c);
    pending_.emplace_back(c, a);
  }

  void remove(int t) {
    alive_[t] = false;
    const auto& v = tris_[t];
    for (int k = 0; k < 3; ++k) edges_.erase(edge_key(v[k], v[(k + 1) % 3]));
  }

  std::optional<int> find(int a, int b) const {
    const auto it = edges_.find(edge_key(a, b));
    if (it == edges_.end()) return std::nullopt;
    return it->second;
  }

  int opposite(int t, int a, int b) const {
    for (int v : tris_[t]) {
      if (v != a && v != b) return v;
    }
    assert(false);
    return -1;
  }

  // Flips edges until every interior edge is locally Delaunay under the
  // perturbed in-circle predicate. The perturbation is a consistent lifting,
  // so the flip sequence terminates.
  void legalize() {
    while (!pending_.empty()) {
      const auto [a, b] = pending_.back();
      pending_.pop_back();
      const auto t = find(a, b);
      const auto u = find(b, a);
      if (!t || !u) continue;
      const int c = opposite(*t, a, b);
      const int d = opposite(*u, a, b);
      if (incircle_sos(pts_[a], a, pts_[b], b, pts_[c], c, pts_[d], d) > 0) {
        remove(*t);
        remove(*u);
        add(a, d, c);
        add(d, b, c);
      }
    }
  }

  std::vector<std::array<int, 3>> triangles() const {
    std::vector<std::array<int, 3>> out;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (!alive_[t]) continue;
      auto v = tris_[t];
      std::sort(v.begin(), v.end());
      out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  const std::vector<Point2>& pts_;
  std::vector<std::array<int, 3>> tris_;
  std::vector<bool> alive_;
  std::unordered_map<std::uint64_t, int> edges_;
  std::vector<std::pair<int, int>> pending_;
};

std::vector<std::array<int, 2>> edges_of(const std::vector<std::array<int, 3>>& tris) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(tris.size() * 3);
  for (const auto& t : tris) {
    edges.push_back({t[0], t[1]});
    edges.push_back({t[0], t[2]});
    edges.push_back({t[1], t[2]});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace

Triangulation delaunay_2d(const PointCloud& cloud) {
  for (const auto& p : cloud) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ParameterError("delaunay_2d: non-finite coordinate");
    }
  }
  Triangulation tri;
  tri.vertices = cloud;
  std::sort(tri.vertices.begin(), tri.vertices.end(), lex_less);
  tri.vertices.erase(std::unique(tri.vertices.begin(), tri.vertices.end()),
                     tri.vertices.end());
  const auto& pts = tri.vertices;
  const int n = static_cast<int>(pts.size());
  if (n < 2) return tri;

  // Points are lexicographically sorted, so a collinear prefix is ordered
  // along its line and every later point lies outside the current hull.
  int k = 2;
  while (k < n && orient(pts[0], pts[1], pts[k]) == 0) ++k;
  if (k == n) {
    for (int i = 0; i + 1 < n; ++i) tri.edges.push_back({i, i + 1});
    return tri;
  }

  Mesh mesh(pts);
  const bool left = orient(pts[0], pts[1], pts[k]) > 0;
  std::vector<int> hull;  // counter-clockwise boundary cycle
  for (int i = 0; i + 1 < k; ++i) {
    if (left) {
      mesh.add(i, i + 1, k);
    } else {
      mesh.add(i + 1, i, k);
    }
  }
  if (left) {
    for (int i = 0; i <= k; ++i) hull.push_back(i);
  } else {
    hull.push_back(k);
    for (int i = k - 1; i >= 0; --i) hull.push_back(i);
  }

  for (int q = k + 1; q < n; ++q) {
    const int h = static_cast<int>(hull.size());
    auto visible = [&](int i) {
      return orient(pts[hull[i]], pts[hull[(i + 1) % h]], pts[q]) < 0;
    };
    int first = -1;
    for (int i = 0; i < h; ++i) {
      if (visible(i)) {
        first = i;
        break;
      }
    }
    assert(first >= 0);
    // Walk back to the start of the cyclic run of visible edges.
    int start = first;
    for (int steps = 0; steps < h && visible((start - 1 + h) % h); ++steps) {
      start = (start - 1 + h) % h;
    }
    std::rotate(hull.begin(), hull.begin() + start, hull.end());
    int run = 0;
    while (run < h && visible(run)) ++run;
    for (int i = 0; i < run; ++i) mesh.add(hull[i + 1], hull[i], q);
    hull.erase(hull.begin() + 1, hull.begin() + run);
    hull.insert(hull.begin() + 1, q);
  }

  mesh.legalize();
  tri.triangles = mesh.triangles();
  tri.edges = edges_of(tri.triangles);
  return tri;
}

double circumradius(const Point2& a, const Point2& b, const Point2& c) {
  const double bx = b.x - a.x;
  const double by = b.y - a.y;
  const double cx = c.x - a.x;
  const double cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  const double ux = (cy * b2 - by * c2) / d;
  const double uy = (bx * c2 - cx * b2) / d;
  return std::sqrt(ux * ux + uy * uy);
}

FilteredComplex alpha_filtration(const Triangulation& tri) {
  const auto& pts = tri.vertices;
  FilteredComplex fc;
  fc.vertices = pts;
  fc.simplices.reserve(pts.size() + tri.edges.size() + tri.triangles.size());

  for (int v = 0; v < static_cast<int>(pts.size()); ++v) {
    fc.simplices.push_back({{v, -1, -1}, 0, 0.0});
  }

  std::vector<double> tri_value(tri.triangles.size());
  std::unordered_map<std::uint64_t, std::vector<std::pair<int, int>>> cofaces;
  for (std::size_t t = 0; t < tri.triangles.size(); ++t) {
    const auto [a, b, c] = tri.triangles[t];
    tri_value[t] = circumradius(pts[a], pts[b], pts[c]);
    fc.simplices.push_back({{a, b, c}, 2, tri_value[t]});
    cofaces[edge_key(a, b)].emplace_back(static_cast<int>(t), c);
    cofaces[edge_key(a, c)].emplace_back(static_cast<int>(t), b);
    cofaces[edge_key(b, c)].emplace_back(static_cast<int>(t), a);
  }

  for (const auto& [u, v] : tri.edges) {
    const Point2& a = pts[u];
    const Point2& b = pts[v];
    double value = 0.5 * std::hypot(b.x - a.x, b.y - a.y);
    const auto it = cofaces.find(edge_key(u, v));
    if (it != cofaces.end()) {
      bool attached = false;
      double smallest = INFINITY;
      for (const auto& [t, opp] : it->second) {
        const Point2& c = pts[opp];
        // Opposite vertex strictly inside the diametral disk <=> obtuse angle.
        if ((a.x - c.x) * (b.x - c.x) + (a.y - c.y) * (b.y - c.y) < 0.0) attached = true;
        smallest = std::min(smallest, tri_value[t]);
      }
      if (attached) value = smallest;
    }
    fc.simplices.push_back({{u, v, -1}, 1, value});
  }

  std::sort(fc.simplices.begin(), fc.simplices.end(), [](const Simplex& x, const Simplex& y) {
    return std::tie(x.value, x.dim, x.vertices) < std::tie(y.value, y.dim, y.vertices);
  });
  return fc;
}

namespace {

struct FaceIndex {
  std::vector<int> vertex;
  std::unordered_map<std::uint64_t, int> edge;
};

FaceIndex index_faces(const FilteredComplex& fc) {
  FaceIndex idx;
  int max_vertex = -1;
  for (const auto& s : fc.simplices) max_vertex = std::max(max_vertex, s.vertices[0]);
  idx.vertex.assign(static_cast<std::size_t>(max_vertex + 1), -1);
  for (std::size_t i = 0; i < fc.simplices.size(); ++i) {
    const auto& s = fc.simplices[i];
    if (s.dim == 0) {
      idx.vertex[s.vertices[0]] = static_cast<int>(i);
    } else if (s.dim == 1) {
      idx.edge[edge_key(s.vertices[0], s.vertices[1])] = static_cast<int>(i);
    }
  }
  return idx;
}

int lookup_vertex(const FaceIndex& idx, int v) {
  return (v >= 0 && v < static_cast<int>(idx.vertex.size())) ? idx.vertex[v] : -1;
}

int lookup_edge(const FaceIndex& idx, int u, int v) {
  const auto it = idx.edge.find(edge_key(u, v));
  return it == idx.edge.end() ? -1 : it->second;
}

// Sorted ascending row indices of the boundary of simplex i, or -1 entries
// for missing faces.
std::vector<int> boundary(const FilteredComplex& fc, const FaceIndex& idx, std::size_t i) {
  const auto& s = fc.simplices[i];
  std::vector<int> col;
  if (s.dim == 1) {
    col = {lookup_vertex(idx, s.vertices[0]), lookup_vertex(idx, s.vertices[1])};
  } else if (s.dim == 2) {
    const auto [a, b, c] = s.vertices;
    col = {lookup_edge(idx, a, b), lookup_edge(idx, a, c), lookup_edge(idx, b, c)};
  }
  std::sort(col.begin(), col.end());
  return col;
}

void check_simplex_shape(const Simplex& s, std::size_t i) {
  const auto fail = [&](const char* what) {
    throw ContractError("filtration: simplex " + std::to_string(i) + " " + what);
  };
  if (s.dim < 0 || s.dim > 2) fail("has unsupported dimension");
  for (int k = 0; k <= s.dim; ++k) {
    if (s.vertices[k] < 0) fail("has a negative vertex index");
    if (k > 0 && s.vertices[k - 1] >= s.vertices[k]) fail("has unsorted vertices");
  }
  if (!std::isfinite(s.value) || s.value < 0.0) fail("has an invalid filtration value");
}

}  // namespace

void validate_filtration(const FilteredComplex& fc) {
  for (std::size_t i = 0; i < fc.simplices.size(); ++i) {
    check_simplex_shape(fc.simplices[i], i);
    if (i > 0) {
      const auto& prev = fc.simplices[i - 1];
      const auto& cur = fc.simplices[i];
      if (std::tie(cur.value, cur.dim) < std::tie(prev.value, prev.dim)) {
        throw ContractError("filtration: simplices not sorted by (value, dim) at index " +
                            std::to_string(i));
      }
    }
  }
  const FaceIndex idx = index_faces(fc);
  for (std::size_t i = 0; i < fc.simplices.size(); ++i) {
    for (int face : boundary(fc, idx, i)) {
      if (face < 0) {
        throw ContractError("filtration: simplex " + std::to_string(i) + " lacks a face");
      }
      // Sorted by (value, dim) with faces before cofaces <=> monotone values.
      if (static_cast<std::size_t>(face) > i) {
        throw ContractError("filtration: face enters after its coface at index " +
                            std::to_string(i));
      }
    }
  }
}

PersistenceDiagram persistence(const FilteredComplex& fc, int degree) {
  if (degree < 0 || degree > 1) {
    throw ParameterError("persistence: only degrees 0 and 1 are supported");
  }
  validate_filtration(fc);
  const FaceIndex idx = index_faces(fc);
  const std::size_t n = fc.simplices.size();

  PersistenceDiagram diagram;
  diagram.degree = degree;

  // Column reduction with clearing: reduce the highest dimension first; every
  // row that becomes a pivot there is a positive simplex whose own column
  // would reduce to zero, so it is skipped in the next dimension down.
  std::vector<int> pivot_owner(n, -1);
  std::vector<std::vector<int>> reduced(n);
  std::vector<bool> cleared(n, false);
  std::vector<int> scratch;

  for (int dim = 2; dim >= degree + 1; --dim) {
    for (std::size_t j = 0; j < n; ++j) {
      if (fc.simplices[j].dim != dim || cleared[j]) continue;
      std::vector<int> col = boundary(fc, idx, j);
      while (!col.empty()) {
        const int owner = pivot_owner[col.back()];
        if (owner < 0) break;
        const auto& other = reduced[owner];
        scratch.clear();
        std::set_symmetric_difference(col.begin(), col.end(), other.begin(), other.end(),
                                      std::back_inserter(scratch));
        col.swap(scratch);
      }
      if (col.empty()) continue;
      const int low = col.back();
      pivot_owner[low] = static_cast<int>(j);
      cleared[low] = true;
      if (dim == degree + 1) {
        const double birth = fc.simplices[low].value;
        const double death = fc.simplices[j].value;
        if (birth < death) diagram.points.push_back({birth, death});
      }
      reduced[j] = std::move(col);
    }
  }

  std::sort(diagram.points.begin(), diagram.points.end(),
            [](const DiagramPoint& a, const DiagramPoint& b) {
              return std::tie(a.birth, a.death) < std::tie(b.birth, b.death);
            });
  return diagram;
}

PersistenceDiagram scale_diagram(const PersistenceDiagram& d, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ParameterError("scale_diagram: factor must be positive and finite");
  }
  PersistenceDiagram out = d;
  for (auto& p : out.points) {
    p.birth *= factor;
    p.death *= factor;
  }
  return out;
}

PersistenceDiagram alpha_persistence(const PointCloud& cloud, int degree) {
  return persistence(alpha_filtration(delaunay_2d(cloud)), degree);
}

}  // namespace srn::complex
