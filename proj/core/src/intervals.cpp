#include "sae/intervals.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "sae/error.hpp"
#include "sae/numeric/normal.hpp"
#include "sae/uncertainty.hpp"

namespace sae {
namespace {

using numeric::normal_cdf;
using numeric::normal_pdf;

void check_area(const AreaDataset& data, Index i) {
  if (i < 0 || i >= data.m()) fail(ErrorCode::InvalidArgument, "area index out of range");
}

Index resolve_d(const IntervalSpec& spec, Index p) {
  const Index d = spec.d.value_or(p + 2);
  if (d <= p) fail(ErrorCode::ValidationError, "interval tuning d must exceed p");
  return d;
}

Interval around(double center, double cutoff, double scale) {
  Interval r;
  r.center = center;
  r.cutoff = cutoff;
  r.half_width = cutoff * scale;
  r.lo = center - r.half_width;
  r.hi = center + r.half_width;
  return r;
}

struct BalancedState {
  BalancedFit fit;
  double B = 0.0;
  Index d = 0;
  double z = 0.0;
};

BalancedState balanced_state(const AreaDataset& data, const IntervalSpec& spec, Index i) {
  check_area(data, i);
  BalancedState s;
  s.fit = balanced_fit(data);
  s.d = resolve_d(spec, data.p());
  s.z = numeric::z_two_sided(spec.alpha);
  if (s.fit.degenerate) fail(ErrorCode::DegenerateShrinkage, "S = 0: shrinkage estimate is 1");
  s.B = B_hat_d(s.fit.S, s.fit.V_common, data.m(), data.p(), s.d);
  if (!(s.B < 1.0)) fail(ErrorCode::DegenerateShrinkage, "estimated B equals 1; interval width collapses");
  return s;
}

Interval balanced_interval(const AreaDataset& data, const BalancedState& s, Index i, double cutoff) {
  const double center = (1.0 - s.B) * data.y(i) + s.B * s.fit.fitted(i);
  Interval r = around(center, cutoff, std::sqrt(s.fit.V_common * (1.0 - s.B)));
  r.B_hat = s.B;
  r.leverage_warning = s.fit.h_diag(i) > 5.0 * static_cast<double>(data.p()) / static_cast<double>(data.m());
  return r;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(IntervalMode mode) noexcept {
  switch (mode) {
    case IntervalMode::NAIVE: return "NAIVE";
    case IntervalMode::CALIBRATED_T4: return "CALIBRATED_T4";
    case IntervalMode::CONDITIONAL_T5: return "CONDITIONAL_T5";
    case IntervalMode::SMITH_T6: return "SMITH_T6";
    case IntervalMode::KNOWN_A: return "KNOWN_A";
  }
  return "?";
}

IntervalMode parse_interval_mode(std::string_view name) {
  const std::string s = lower(name);
  if (s == "naive") return IntervalMode::NAIVE;
  if (s == "calibrated_t4" || s == "t4") return IntervalMode::CALIBRATED_T4;
  if (s == "conditional_t5" || s == "t5") return IntervalMode::CONDITIONAL_T5;
  if (s == "smith_t6" || s == "t6" || s == "smith") return IntervalMode::SMITH_T6;
  if (s == "known_a" || s == "known") return IntervalMode::KNOWN_A;
  fail(ErrorCode::ValidationError, "unknown interval mode '" + std::string(name) + "'");
}

double B_hat_d(double S, double V, Index m, Index p, Index d) {
  if (!(V > 0.0)) fail(ErrorCode::DomainError, "B_d: V must be positive");
  const double cap = 1.0 / static_cast<double>(m - p);
  const double ratio = S > 0.0 ? std::min(V / S, cap) : cap;
  return static_cast<double>(m - d) * ratio;
}

CoverageExpansion balanced_coverage_expansion(double t, double B, Index m, double h, Index d) {
  const double mm = static_cast<double>(m);
  const double bracket = (1.0 + t * t) * B * B / (2.0 * mm * (1.0 - B) * (1.0 - B)) +
                         B / (1.0 - B) * (h + (5.0 - static_cast<double>(d)) / mm);
  CoverageExpansion e;
  e.nominal = 2.0 * normal_cdf(t) - 1.0;
  e.correction = -t * normal_pdf(t) * bracket;
  e.predicted_coverage = e.nominal + e.correction;
  return e;
}

CoverageExpansion conditional_coverage_expansion(double t, double B, Index m, double h, Index d, double U) {
  const double mm = static_cast<double>(m);
  const double bracket = (1.0 + t * t) * B * B / (2.0 * mm * (1.0 - B) * (1.0 - B)) +
                         (2.0 * U * U + 3.0 - static_cast<double>(d)) * B / (mm * (1.0 - B)) +
                         B * h / (1.0 - B);
  CoverageExpansion e;
  e.nominal = 2.0 * normal_cdf(t) - 1.0;
  e.correction = -t * normal_pdf(t) * bracket;
  e.predicted_coverage = e.nominal + e.correction;
  return e;
}

double t4_cutoff(double z, double B, Index m, double h, Index d) {
  const double mm = static_cast<double>(m);
  return z * (1.0 + (1.0 + z * z) * B * B / (4.0 * mm * (1.0 - B) * (1.0 - B)) +
              (5.0 - static_cast<double>(d) + mm * h) * B / (2.0 * mm * (1.0 - B)));
}

double t5_cutoff(double z, double B, Index m, double h, Index d, double U) {
  const double mm = static_cast<double>(m);
  return z * (1.0 + (1.0 + z * z) * B * B / (4.0 * mm * (1.0 - B) * (1.0 - B)) +
              (2.0 * U * U + 3.0 - static_cast<double>(d) + mm * h) * B / (2.0 * mm * (1.0 - B)));
}

Interval known_A_interval(const AreaDataset& data, double B, Index i, double alpha) {
  check_area(data, i);
  if (!(B >= 0.0 && B < 1.0)) fail(ErrorCode::DomainError, "known B must lie in [0, 1)");
  if (!data.balanced(1e-10)) fail(ErrorCode::ValidationError, "known-A interval needs equal V_i");
  const numeric::SpdFactor xtx(numeric::cross_product(data.X));
  const Vector fitted = data.X * xtx.solve(Vector(data.X.transpose() * data.y));
  const double h = hat_diagonal(data.X)(i);
  const double V = data.V(0);
  Interval r = around((1.0 - B) * data.y(i) + B * fitted(i), numeric::z_two_sided(alpha),
                      std::sqrt(V * (1.0 - B + B * h)));
  r.B_hat = B;
  return r;
}

Interval naive_interval(const AreaDataset& data, const IntervalSpec& spec, Index i) {
  const BalancedState s = balanced_state(data, spec, i);
  return balanced_interval(data, s, i, s.z);
}

Interval naive_interval(const AreaDataset& data, const FayHerriotFit& fit, Index i, double alpha) {
  check_area(data, i);
  const MseDecomposition g = g_terms(data, fit.A_hat, 0.0);
  Interval r = around(fit.theta_hat(i), numeric::z_two_sided(alpha), std::sqrt(g.g1(i) + g.g2(i)));
  r.B_hat = fit.B_hat(i);
  return r;
}

Interval t4_calibrated_interval(const AreaDataset& data, const IntervalSpec& spec, Index i) {
  const BalancedState s = balanced_state(data, spec, i);
  return balanced_interval(data, s, i, t4_cutoff(s.z, s.B, data.m(), s.fit.h_diag(i), s.d));
}

Interval t5_conditional_interval(const AreaDataset& data, const IntervalSpec& spec, Index i) {
  const BalancedState s = balanced_state(data, spec, i);
  const double U = (data.y(i) - s.fit.fitted(i)) * std::sqrt(static_cast<double>(data.m() - data.p())) /
                   std::sqrt(s.fit.S);
  return balanced_interval(data, s, i, t5_cutoff(s.z, s.B, data.m(), s.fit.h_diag(i), s.d, U));
}

SmithTerms smith_terms(const AreaDataset& data, double A, VarianceMethod method, Index i, double z) {
  check_area(data, i);
  if (!(A > 0.0)) fail(ErrorCode::BoundaryEstimate, "Smith terms need A > 0");
  const MseDecomposition g = g_terms(data, A, var_A_hat(data, A, method));
  SmithTerms t;
  t.D = data.V(i);
  t.B = t.D / (t.D + A);
  t.bias_A = bias_A_hat(data, A, method);
  t.g3 = g.g3(i);
  t.h2 = g.g1(i) + g.g2(i);
  t.c_star = 2.0 * t.g3 - t.B * t.B * t.bias_A + (z * z + 1.0) * t.D / (4.0 * A) * t.g3;
  t.q = t.B * t.B * t.bias_A + t.c_star - 2.0 * t.g3;
  return t;
}

CoverageExpansion smith_coverage_expansion(const AreaDataset& data, double A, VarianceMethod method,
                                     Index i, double z, double c_star) {
  SmithTerms t = smith_terms(data, A, method, i, z);
  const double q = t.B * t.B * t.bias_A + c_star - 2.0 * t.g3;
  CoverageExpansion e;
  e.nominal = 2.0 * normal_cdf(z) - 1.0;
  e.correction = z * normal_pdf(z) * q / t.h2 -
                 (z * z * z + z) * normal_pdf(z) * t.g3 / (4.0 * t.h2 * t.h2) * t.D * t.D / (A + t.D);
  e.predicted_coverage = e.nominal + e.correction;
  return e;
}

Interval smith_t6_interval(const AreaDataset& data, const FayHerriotFit& fit, Index i, double alpha) {
  check_area(data, i);
  const double eps = 1e-8 * data.V.mean();
  if (fit.A_hat < eps) {
    fail(ErrorCode::BoundaryEstimate, "Smith interval refused: A-hat below 1e-8 mean(V)");
  }
  const double z = numeric::z_two_sided(alpha);
  const SmithTerms t = smith_terms(data, fit.A_hat, fit.method, i, z);
  const double s2 = t.h2 + t.c_star;
  if (!(s2 > 0.0)) fail(ErrorCode::DegenerateShrinkage, "Smith interval: non-positive s^2");
  Interval r = around(fit.theta_hat(i), z, std::sqrt(s2));
  r.B_hat = fit.B_hat(i);
  return r;
}

Interval make_interval(const AreaDataset& data, const IntervalSpec& spec, Index i,
                       const FayHerriotFit* fit, std::optional<double> known_B) {
  switch (spec.mode) {
    case IntervalMode::NAIVE:
      if (fit && !data.balanced(1e-10)) return naive_interval(data, *fit, i, spec.alpha);
      return naive_interval(data, spec, i);
    case IntervalMode::CALIBRATED_T4:
      return t4_calibrated_interval(data, spec, i);
    case IntervalMode::CONDITIONAL_T5:
      return t5_conditional_interval(data, spec, i);
    case IntervalMode::SMITH_T6:
      if (!fit) fail(ErrorCode::InvalidArgument, "Smith interval needs a fitted model");
      return smith_t6_interval(data, *fit, i, spec.alpha);
    case IntervalMode::KNOWN_A:
      if (!known_B) fail(ErrorCode::InvalidArgument, "known-A interval needs B");
      return known_A_interval(data, *known_B, i, spec.alpha);
  }
  fail(ErrorCode::InvalidArgument, "unknown interval mode");
}

}  // namespace sae
