#pragma once

namespace sae::numeric {

enum class NormalFunction { Pdf, Cdf, Quantile };

/// Standard normal pdf, cdf, or quantile. Throws DomainError for NaN input or
/// a quantile argument outside (0, 1).
double std_normal(NormalFunction kind, double arg);

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

/// Upper alpha/2 point z such that P(|Z| > z) = alpha.
double z_two_sided(double alpha);

}  // namespace sae::numeric
