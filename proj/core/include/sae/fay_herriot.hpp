#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "sae/area_data.hpp"

namespace sae {

enum class VarianceMethod { FH_MOMENT, PR_ANOVA, ML, REML };

std::string_view to_string(VarianceMethod method) noexcept;
/// Accepts "fh", "fh_moment", "pr", "pr_anova", "ml", "reml" (case-insensitive).
VarianceMethod parse_variance_method(std::string_view name);

struct FayHerriotFit {
  double A_hat = 0.0;
  Vector beta_hat;
  Vector B_hat;      // V_i / (V_i + A_hat)
  Vector theta_hat;  // (1 - B_i) y_i + B_i x_i^T beta_hat
  VarianceMethod method = VarianceMethod::REML;
  int iterations = 0;
  bool at_boundary = false;
};

struct EstimateOptions {
  double root_tol = 1e-10;   // absolute, on A
  double rel_change = 1e-8;  // FH alternation stop: |dA| < rel_change (1 + A)
  int max_iter = 200;
  /// Upper end of the likelihood search; default 1e4 * sample variance of y.
  std::optional<double> A_max;
};

/// beta~(A) = [X^T D^{-1} X]^{-1} X^T D^{-1} y with D = diag(V_i + A).
Vector gls_beta(const AreaDataset& data, double A);

/// sum_i (y_i - x_i^T beta)^2 / (V_i + A)
double fh_moment_lhs(const AreaDataset& data, double A, const Vector& beta);

/// Moment estimator on OLS residuals, truncated at zero.
double pr_anova_estimate(const AreaDataset& data);
/// The same before truncation (may be negative).
double pr_anova_raw(const AreaDataset& data);

/// Log-likelihood of N(X beta~(A), D) (up to constants); restricted adds the
/// -1/2 log|X^T D^{-1} X| term.
double log_likelihood(const AreaDataset& data, double A, bool restricted);
/// Derivative of log_likelihood in A.
double likelihood_score(const AreaDataset& data, double A, bool restricted);

FayHerriotFit estimate_A(const AreaDataset& data, VarianceMethod method,
                         const EstimateOptions& opts = {});

/// Completes a fit at a given A (beta, B, theta).
FayHerriotFit fit_at(const AreaDataset& data, double A, VarianceMethod method);

Vector eblup(const AreaDataset& data, const FayHerriotFit& fit);

// Balanced case (all V_i equal).

struct BalancedFit {
  double V_common = 0.0;
  double S = 0.0;  // ||y - P_X y||^2
  double B_hat_eb = 0.0;
  double B_hat_plus = 0.0;
  Vector h_diag;
  Vector beta_ols;
  Vector fitted;  // P_X y
  bool degenerate = false;  // S == 0; estimate falls back to the regression fit
};

/// Requires equal V_i and m > p + 2 (TooFewAreas).
BalancedFit balanced_fit(const AreaDataset& data);

struct JamesSteinResult {
  BalancedFit fit;
  Vector estimate;
};

JamesSteinResult james_stein_balanced(const AreaDataset& data, bool positive_part);

struct BayesRisk {
  Vector per_area;
  double total = 0.0;
};

/// Bayes risk of the James-Stein estimator with true shrinkage B.
BayesRisk theorem3_risk(const AreaDataset& data, double B);

struct MonteCarloRisk {
  Vector mean;  // per-area mean squared error
  Vector se;
  double total_mean = 0.0;
  double total_se = 0.0;
  long reps = 0;
};

/// Monte Carlo risk of the (non-truncated) James-Stein estimator under
/// theta ~ N(X beta, A), y | theta ~ N(theta, V), with B = V / (V + A).
MonteCarloRisk james_stein_mc_risk(const Matrix& X, double V, double B, const Vector& beta,
                                   long reps, std::uint64_t seed, bool positive_part = false);

/// (I - B) y + B X beta~(A) with B = (V + A I)^{-1} V.
Vector general_v_blup(const GeneralVModel& model, double A);
/// beta~(A) under the full covariance V + A I.
Vector general_v_gls_beta(const GeneralVModel& model, double A);

/// [1 - (1 - w) B] y + (1 - w) B P_X y. Without B, uses min(B_eb, 1).
Vector balanced_loss_estimate(const AreaDataset& data, double w,
                              std::optional<double> B = std::nullopt);

struct BalancedLossRisk {
  double precision = 0.0;  // m^{-1} E||T - theta||^2
  double precision_se = 0.0;
  double loss = 0.0;  // m^{-1} E[w||y - T||^2 + (1 - w)||T - theta||^2]
  double loss_se = 0.0;
};

/// Monte Carlo risk of balanced_loss_estimate (known B or EB).
BalancedLossRisk balanced_loss_mc_risk(const Matrix& X, double V, double B, double w,
                                       bool empirical, long reps, std::uint64_t seed);

}  // namespace sae
