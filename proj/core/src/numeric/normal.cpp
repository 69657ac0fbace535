#include "sae/numeric/normal.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <string>

#include "sae/error.hpp"

namespace sae::numeric {

double std_normal(NormalFunction kind, double arg) {
  if (std::isnan(arg)) fail(ErrorCode::DomainError, "std_normal: NaN argument");
  const boost::math::normal_distribution<double> n;
  switch (kind) {
    case NormalFunction::Pdf:
      return std::isinf(arg) ? 0.0 : boost::math::pdf(n, arg);
    case NormalFunction::Cdf:
      if (std::isinf(arg)) return arg > 0 ? 1.0 : 0.0;
      return boost::math::cdf(n, arg);
    case NormalFunction::Quantile:
      if (!(arg > 0.0 && arg < 1.0)) {
        fail(ErrorCode::DomainError, "std_normal: quantile argument " + std::to_string(arg) +
                                         " outside (0, 1)");
      }
      return boost::math::quantile(n, arg);
  }
  fail(ErrorCode::InvalidArgument, "std_normal: unknown function");
}

double normal_pdf(double x) { return std_normal(NormalFunction::Pdf, x); }
double normal_cdf(double x) { return std_normal(NormalFunction::Cdf, x); }
double normal_quantile(double p) { return std_normal(NormalFunction::Quantile, p); }

double z_two_sided(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::DomainError, "alpha outside (0, 1)");
  return normal_quantile(1.0 - 0.5 * alpha);
}

}  // namespace sae::numeric
