#pragma once

#include <functional>

namespace sae::numeric {

using ScalarFunction = std::function<double(double)>;

struct RootOptions {
  double tol = 1e-10;
  int max_iter = 200;
};

/// Brent's method. Requires f(lo)*f(hi) <= 0; the endpoints may be given in
/// either order. Throws NoBracket or NonConvergence.
double brent_root(const ScalarFunction& f, double lo, double hi, double tol = 1e-10);
double brent_root(const ScalarFunction& f, double lo, double hi, const RootOptions& opts);

struct Minimum {
  double x;
  double fx;
};

/// Brent minimization on [lo, hi] (golden section plus parabolic steps).
Minimum brent_minimize(const ScalarFunction& f, double lo, double hi, int bits = 40,
                       int max_iter = 500);

}  // namespace sae::numeric
