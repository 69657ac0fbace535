#pragma once

#include <optional>
#include <string_view>

#include "sae/fay_herriot.hpp"

namespace sae {

enum class IntervalMode { NAIVE, CALIBRATED_T4, CONDITIONAL_T5, SMITH_T6, KNOWN_A };

std::string_view to_string(IntervalMode mode) noexcept;
IntervalMode parse_interval_mode(std::string_view name);

struct IntervalSpec {
  double alpha = 0.05;
  /// Tuning constant of B_d(S) = (m - d) min{V/S, 1/(m - p)}; defaults to p + 2.
  std::optional<Index> d;
  IntervalMode mode = IntervalMode::CALIBRATED_T4;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
  double half_width = 0.0;
  double cutoff = 0.0;      // multiplier of the scale (z, t* or the conditional t*)
  double B_hat = 0.0;       // shrinkage used (balanced modes)
  bool leverage_warning = false;  // h_ii > 5p/m
};

struct CoverageExpansion {
  double nominal = 0.0;
  double correction = 0.0;
  double predicted_coverage = 0.0;
};

/// (m - d) min{V/S, 1/(m - p)}
double B_hat_d(double S, double V, Index m, Index p, Index d);

/// Unconditional coverage of the balanced interval with cut-off t and true B.
CoverageExpansion balanced_coverage_expansion(double t, double B, Index m, double h, Index d);
/// Coverage conditional on U = (y_1 - x_1^T beta-hat) sqrt(m - p) / sqrt(S).
CoverageExpansion conditional_coverage_expansion(double t, double B, Index m, double h, Index d, double U);

/// z [1 + (1 + z^2) B^2 / (4m(1-B)^2) + (5 - d + m h) B / (2m(1-B))]
double t4_cutoff(double z, double B, Index m, double h, Index d);
/// Same with (5 - d) replaced by (2U^2 + 3 - d).
double t5_cutoff(double z, double B, Index m, double h, Index d, double U);

/// Known-B interval for equal V_i: half-width z sqrt(V (1 - B + B h_ii)).
Interval known_A_interval(const AreaDataset& data, double B, Index i, double alpha);
/// Balanced EB interval with cut-off z and B_d(S).
Interval naive_interval(const AreaDataset& data, const IntervalSpec& spec, Index i);
/// Unbalanced EB interval theta-hat +- z h(A-hat), h^2 = g1 + g2.
Interval naive_interval(const AreaDataset& data, const FayHerriotFit& fit, Index i, double alpha);
Interval t4_calibrated_interval(const AreaDataset& data, const IntervalSpec& spec, Index i);
Interval t5_conditional_interval(const AreaDataset& data, const IntervalSpec& spec, Index i);

struct SmithTerms {
  double h2 = 0.0;      // g1 + g2
  double c_star = 0.0;  // 2 g3 - B^2 b + (z^2 + 1) D g3 / (4A)
  double q = 0.0;       // B^2 b + c_star - 2 g3
  double bias_A = 0.0;
  double D = 0.0;       // sampling variance V_i
  double g3 = 0.0;
  double B = 0.0;
};

SmithTerms smith_terms(const AreaDataset& data, double A, VarianceMethod method, Index i, double z);

/// Coverage of theta-hat +- z s with s^2 = h^2 + c, evaluated at true A.
CoverageExpansion smith_coverage_expansion(const AreaDataset& data, double A, VarianceMethod method,
                                     Index i, double z, double c_star);

/// Throws BoundaryEstimate when A-hat < 1e-8 mean(V).
Interval smith_t6_interval(const AreaDataset& data, const FayHerriotFit& fit, Index i, double alpha);

/// Dispatch on spec.mode. KNOWN_A needs `known_B`, SMITH_T6 needs `fit`.
Interval make_interval(const AreaDataset& data, const IntervalSpec& spec, Index i,
                       const FayHerriotFit* fit = nullptr,
                       std::optional<double> known_B = std::nullopt);

}  // namespace sae
