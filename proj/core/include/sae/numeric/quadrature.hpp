#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sae::numeric {

struct QuadratureResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  std::size_t evaluations = 0;
};

struct QuadratureOptions {
  double rel_tol = 1e-8;
  double abs_tol = 0.0;
  std::size_t max_evaluations = 150000;
};

/// A composite Gauss-Kronrod rule refined for a particular integrand. Nodes
/// and weights are in the original variable (Jacobian folded into weights),
/// so the rule can be reused for related functionals.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  /// Per-component value and error estimate of the integrand the rule was built for.
  std::vector<double> values;
  std::vector<double> abs_error_estimates;
  std::size_t evaluations = 0;

  double apply(const std::function<double(double)>& h) const;
};

/// Writes `out.size()` components of the integrand at x.
using VectorIntegrand = std::function<void(double x, std::span<double> out)>;

/// Adaptive G7/K15 subdivision on [a, b]; each component must satisfy
/// err <= max(abs_tol, rel_tol * integral of |f_c|).
QuadratureRule adaptive_rule(const VectorIntegrand& f, std::size_t components, double a,
                             double b, std::span<const double> breakpoints,
                             const QuadratureOptions& opts = {});

/// Same, on (0, inf) through x = scale (t / (1 - t))^2. Breakpoints are in x units.
QuadratureRule adaptive_rule_halfline(const VectorIntegrand& f, std::size_t components,
                                      double scale, std::span<const double> breakpoints,
                                      const QuadratureOptions& opts = {});

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts = {});
QuadratureResult integrate_unit_interval(const std::function<double(double)>& f,
                                         const QuadratureOptions& opts = {});
QuadratureResult integrate_positive_halfline(const std::function<double(double)>& g,
                                             double tol = 1e-8);
QuadratureResult integrate_positive_halfline(const std::function<double(double)>& g,
                                             double scale, const QuadratureOptions& opts);

}  // namespace sae::numeric
