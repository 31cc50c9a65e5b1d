#pragma once

#include "srn/types.hpp"

namespace srn::complex::detail {

/// Relative tolerance of the floating-point filter. Determinants whose
/// magnitude is below this fraction of their permanent are recomputed with
/// exact rational arithmetic.
inline constexpr double kPredicateTolerance = 1e-12;

/// Sign of the signed area of (a, b, c): +1 counter-clockwise, -1 clockwise,
/// 0 collinear. Exact.
int orient(const Point2& a, const Point2& b, const Point2& c);

/// Sign of the in-circle determinant for counter-clockwise (a, b, c):
/// +1 if d is strictly inside the circumcircle, -1 strictly outside, 0 on it.
/// Exact.
int incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

/// In-circle test under symbolic perturbation of the lifted heights: the
/// vertex with the smallest index receives the dominant perturbation. Never
/// returns 0 for four distinct points with (a, b, c) non-degenerate.
int incircle_sos(const Point2& a, int ia, const Point2& b, int ib, const Point2& c,
                 int ic, const Point2& d, int id);

}  // namespace srn::complex::detail
