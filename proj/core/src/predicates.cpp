#include "predicates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include <boost/multiprecision/cpp_int.hpp>

namespace srn::complex::detail {

namespace {

using Rational = boost::multiprecision::cpp_rational;

int sign_of(const Rational& r) { return r > 0 ? 1 : (r < 0 ? -1 : 0); }

int orient_exact(const Point2& a, const Point2& b, const Point2& c) {
  const Rational acx = Rational(a.x) - Rational(c.x);
  const Rational acy = Rational(a.y) - Rational(c.y);
  const Rational bcx = Rational(b.x) - Rational(c.x);
  const Rational bcy = Rational(b.y) - Rational(c.y);
  return sign_of(acx * bcy - acy * bcx);
}

int incircle_exact(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const Rational adx = Rational(a.x) - Rational(d.x);
  const Rational ady = Rational(a.y) - Rational(d.y);
  const Rational bdx = Rational(b.x) - Rational(d.x);
  const Rational bdy = Rational(b.y) - Rational(d.y);
  const Rational cdx = Rational(c.x) - Rational(d.x);
  const Rational cdy = Rational(c.y) - Rational(d.y);
  const Rational alift = adx * adx + ady * ady;
  const Rational blift = bdx * bdx + bdy * bdy;
  const Rational clift = cdx * cdx + cdy * cdy;
  const Rational det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                       clift * (adx * bdy - bdx * ady);
  return sign_of(det);
}

}  // namespace

int orient(const Point2& a, const Point2& b, const Point2& c) {
  const double acx = a.x - c.x;
  const double bcx = b.x - c.x;
  const double acy = a.y - c.y;
  const double bcy = b.y - c.y;
  const double left = acx * bcy;
  const double right = acy * bcx;
  const double det = left - right;
  const double bound = kPredicateTolerance * (std::abs(left) + std::abs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient_exact(a, b, c);
}

int incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a.x - d.x;
  const double bdx = b.x - d.x;
  const double cdx = c.x - d.x;
  const double ady = a.y - d.y;
  const double bdy = b.y - d.y;
  const double cdy = c.y - d.y;

  const double bdxcdy = bdx * cdy;
  const double cdxbdy = cdx * bdy;
  const double alift = adx * adx + ady * ady;
  const double cdxady = cdx * ady;
  const double adxcdy = adx * cdy;
  const double blift = bdx * bdx + bdy * bdy;
  const double adxbdy = adx * bdy;
  const double bdxady = bdx * ady;
  const double clift = cdx * cdx + cdy * cdy;

  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                     clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = kPredicateTolerance * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return incircle_exact(a, b, c, d);
}

int incircle_sos(const Point2& a, int ia, const Point2& b, int ib, const Point2& c,
                 int ic, const Point2& d, int id) {
  const int s = incircle(a, b, c, d);
  if (s != 0) return s;

  // The in-circle determinant is linear in each lifted height. Its partial
  // derivatives are, up to a common positive factor:
  //   d/dh_a = +orient(d, b, c)   d/dh_b = +orient(a, d, c)
  //   d/dh_c = +orient(a, b, d)   d/dh_d = -orient(a, b, c)
  // Raising each height by eps^(rank) with the lowest index dominating, the
  // sign is that of the first non-zero coefficient in index order.
  std::array<std::pair<int, int>, 4> terms{{
      {ia, orient(d, b, c)},
      {ib, orient(a, d, c)},
      {ic, orient(a, b, d)},
      {id, -orient(a, b, c)},
  }};
  std::sort(terms.begin(), terms.end());
  for (const auto& [index, coefficient] : terms) {
    if (coefficient != 0) return coefficient;
  }
  return 0;
}

}  // namespace srn::complex::detail
