#pragma once

#include <string>
#include <vector>

#include "sae/hb.hpp"
#include "sae/uncertainty.hpp"

namespace sae {

/// Unit-level sample for the nested-error model, grouped by area. Rows of X
/// and y are stored contiguously per area; offsets[i]..offsets[i+1] index area i.
class UnitDataset {
 public:
  /// Groups units by `unit_area` (order of first appearance in `area_ids`).
  /// N and Xbar are per area, aligned with `area_ids`.
  static UnitDataset make(const std::vector<std::string>& unit_area, const Vector& y,
                          const Matrix& X, std::vector<std::string> area_ids, const Vector& N,
                          const Matrix& Xbar);
  /// Same, with units already grouped: sizes n_i in area order.
  static UnitDataset from_grouped(const std::vector<Index>& n, const Vector& y, const Matrix& X,
                                  const Vector& N, const Matrix& Xbar,
                                  std::vector<std::string> area_ids = {});

  /// Copy with a new response vector (same grouping).
  UnitDataset with_response(const Vector& y) const;

  Index m() const noexcept { return static_cast<Index>(offsets_.size()) - 1; }
  Index n() const noexcept { return y_.size(); }
  Index p() const noexcept { return X_.cols(); }
  Index n_i(Index i) const { return offsets_[static_cast<std::size_t>(i) + 1] - offsets_[static_cast<std::size_t>(i)]; }
  Index offset(Index i) const { return offsets_[static_cast<std::size_t>(i)]; }

  const std::vector<std::string>& area_ids() const noexcept { return ids_; }
  const Vector& y() const noexcept { return y_; }
  const Matrix& X() const noexcept { return X_; }
  const Vector& N() const noexcept { return N_; }
  const Matrix& Xbar() const noexcept { return Xbar_; }
  const Vector& ybar_s() const noexcept { return ybar_; }
  const Matrix& xbar_s() const noexcept { return xbar_; }
  /// Mean covariate of the unsampled units; equals xbar_s when N_i = n_i.
  const Matrix& xbar_u() const noexcept { return xbar_u_; }
  const Vector& f() const noexcept { return f_; }

  /// Per-area X_i^T X_i, X_i^T y_i, y_i^T y_i.
  const std::vector<Matrix>& xtx() const noexcept { return xtx_; }
  const std::vector<Vector>& xty() const noexcept { return xty_; }
  const Vector& yty() const noexcept { return yty_; }

  /// Pooled within-area cross products of the area-centered data.
  const Matrix& within_xx() const noexcept { return wxx_; }
  const Vector& within_xy() const noexcept { return wxy_; }
  double within_yy() const noexcept { return wyy_; }

 private:
  void finish();

  std::vector<std::string> ids_;
  std::vector<Index> offsets_;
  Vector y_;
  Matrix X_;
  Vector N_;
  Matrix Xbar_;
  Vector ybar_;
  Matrix xbar_;
  Matrix xbar_u_;
  Vector f_;
  std::vector<Matrix> xtx_;
  std::vector<Vector> xty_;
  Vector yty_;
  Matrix wxx_;
  Vector wxy_;
  double wyy_ = 0.0;
};

enum class UnitMethod { ANOVA, ML, REML };

std::string_view to_string(UnitMethod method) noexcept;
UnitMethod parse_unit_method(std::string_view name);

struct VarianceComponents {
  double sigma2_e = 0.0;
  double sigma2_v = 0.0;
  UnitMethod method = UnitMethod::ANOVA;
  double n_star = 0.0;
  Index p_star = 0;
  double sigma2_v_raw = 0.0;  // before truncation at zero
  bool truncated = false;
};

/// Block GLS estimate of beta; Sigma_i^{-1} = (I - (delta_i / n_i) 1 1^T) / sigma2_e.
Vector unit_gls(const UnitDataset& data, const VarianceComponents& psi);
/// X^T Sigma^{-1} X.
SymmetricMatrix unit_information(const UnitDataset& data, const VarianceComponents& psi);

/// Within-area and overall OLS moment estimators. Throws
/// InsufficientWithinVariation when n - m - p* <= 0.
VarianceComponents anova_components(const UnitDataset& data);

/// Maximizes the (restricted) likelihood over rho = sigma2_v / sigma2_e.
VarianceComponents likelihood_components(const UnitDataset& data, bool restricted);

VarianceComponents estimate_components(const UnitDataset& data, UnitMethod method);

struct UnitFit {
  Vector beta;
  Vector delta;
  Vector theta;    // X-bar_i^T beta + delta_i (ybar_is - xbar_is^T beta)
  Vector theta_u;  // same with X-bar_i replaced by the unsampled mean
  Vector gamma;    // f_i ybar_is + (1 - f_i) theta_u
};

UnitFit unit_blup(const UnitDataset& data, const VarianceComponents& psi);

/// Covariance matrix of (sigma2_v-hat, sigma2_e-hat), order (v, e).
Eigen::Matrix2d unit_component_covariance(const UnitDataset& data, const VarianceComponents& psi);
/// O(1/m) bias of (sigma2_v-hat, sigma2_e-hat); zero for ANOVA and REML.
Eigen::Vector2d unit_component_bias(const UnitDataset& data, const VarianceComponents& psi);

/// g1 + g2 + 2 g3 - b^T grad g1 for the area mean theta_i.
MseDecomposition unit_mse(const UnitDataset& data, const VarianceComponents& psi);

struct UnitHbPrior {
  double a0 = 0.0;
  double g0 = 0.0;
  double a1 = 0.001;
  double g1 = 0.0;
};

struct UnitHbResult {
  HbPosterior lambda_posterior;  // grid over lambda = sigma2_e / sigma2_v
  Vector gamma;
  Vector gamma_variance;
  Vector theta;
  Vector theta_variance;
};

/// Log of the unnormalized posterior of lambda with beta and r = 1/sigma2_e integrated out.
double unit_log_posterior_lambda(const UnitDataset& data, const UnitHbPrior& prior, double lambda);

UnitHbResult unit_hb(const UnitDataset& data, const UnitHbPrior& prior, const HbOptions& opts = {});

}  // namespace sae
