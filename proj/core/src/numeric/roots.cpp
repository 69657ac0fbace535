#include "sae/numeric/roots.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <utility>

#include "sae/error.hpp"

namespace sae::numeric {

double brent_root(const ScalarFunction& f, double lo, double hi, double tol) {
  RootOptions opts;
  opts.tol = tol;
  return brent_root(f, lo, hi, opts);
}

double brent_root(const ScalarFunction& f, double lo, double hi, const RootOptions& opts) {
  if (!(opts.tol > 0.0)) fail(ErrorCode::InvalidArgument, "brent_root: tol must be positive");
  if (lo > hi) std::swap(lo, hi);

  double a = lo, b = hi;
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (std::isnan(fa) || std::isnan(fb) || (fa > 0.0) == (fb > 0.0)) {
    std::ostringstream os;
    os << "brent_root: f(" << a << ")=" << fa << " and f(" << b << ")=" << fb
       << " do not bracket a root";
    fail(ErrorCode::NoBracket, os.str());
  }

  const double eps = std::numeric_limits<double>::epsilon();
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * eps * std::fabs(b) + 0.5 * opts.tol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0) return b;

    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      const double min1 = 3.0 * xm * q - std::fabs(tol1 * q);
      const double min2 = std::fabs(e * q);
      if (2.0 * p < std::min(min1, min2)) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::fabs(d) > tol1 ? d : std::copysign(tol1, xm);
    fb = f(b);
  }
  fail(ErrorCode::NonConvergence, "brent_root: iteration limit reached");
}

Minimum brent_minimize(const ScalarFunction& f, double lo, double hi, int bits, int max_iter) {
  if (lo > hi) std::swap(lo, hi);
  std::uintmax_t it = static_cast<std::uintmax_t>(max_iter);
  const auto r = boost::math::tools::brent_find_minima(f, lo, hi, bits, it);
  if (it >= static_cast<std::uintmax_t>(max_iter)) {
    fail(ErrorCode::NonConvergence, "brent_minimize: iteration limit reached");
  }
  return {r.first, r.second};
}

}  // namespace sae::numeric
