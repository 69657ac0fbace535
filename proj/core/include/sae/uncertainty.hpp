#pragma once

#include <cstdint>

#include "sae/fay_herriot.hpp"

namespace sae {

enum class MseKind { TRUE_APPROX, NAIVE_PLUGIN, SECOND_ORDER, MORRIS };

struct MseDecomposition {
  Vector g1;
  Vector g2;
  Vector g3;
  /// B_i^2 b(A), subtracted for methods with O(1/m) bias in A; zero otherwise.
  Vector bias_term;
  Vector total;
  MseKind kind = MseKind::TRUE_APPROX;
  bool boundary_warning = false;

  /// First tabulated column of the second-order estimator: g1 + g3 - B^2 b.
  Vector corrected_g1() const;
};

/// g1 = V(1 - B), g2 = B^2 x^T [sum x x^T / (V + A)]^{-1} x, g3 = V^2 (A + V)^{-3} var_A.
MseDecomposition g_terms(const AreaDataset& data, double A, double var_A);

/// Asymptotic variance of A-hat for each estimator.
double var_A_hat(const AreaDataset& data, double A, VarianceMethod method);
/// O(1/m) bias of A-hat; zero for PR_ANOVA and REML.
double bias_A_hat(const AreaDataset& data, double A, VarianceMethod method);

/// g1 + g2 + 2 g3 - B^2 b(A) at A-hat.
MseDecomposition mse_second_order(const AreaDataset& data, const FayHerriotFit& fit);
/// g1 + g2 + g3 at A-hat.
MseDecomposition mse_naive(const AreaDataset& data, const FayHerriotFit& fit);

enum class MorrisVbar { PrecisionWeighted, Arithmetic };

struct MorrisFit {
  Vector B_hat_M;
  Vector theta_M;
  Vector t_hat;
  double V_bar = 0.0;
  Vector g1;
  Vector g2;
  Vector g3;
  Vector s2;
};

/// Morris' approximation to the posterior mean and variance. `vbar` selects
/// the mean of V used in the third term.
MorrisFit morris_measure(const AreaDataset& data, double A_hat, const Vector& beta_hat,
                         MorrisVbar vbar = MorrisVbar::PrecisionWeighted);

/// K = D^{-1} - D^{-1} X (X^T D^{-1} X)^{-1} X^T D^{-1}, D = V + A I.
SymmetricMatrix general_v_K(const GeneralVModel& model, double A);

/// V(I - B) + B X [X^T D^{-1} X]^{-1} X^T B^T + 2 V K^3 V / tr(V^{-2}).
SymmetricMatrix general_v_plugin_mse(const GeneralVModel& model, double A);

struct MseMonteCarlo {
  long reps = 0;
  Vector empirical_mse;  // E(theta-hat - theta)^2 per area
  Vector empirical_se;
  Vector mean_mse_s;  // mean of the second-order estimator
  Vector mean_mse_i;  // mean of the naive estimator
  Vector mean_g3;
  double mean_A = 0.0;
  double var_A = 0.0;
  double mean_A_raw = 0.0;  // PR before truncation, otherwise equal to mean_A
  double var_A_raw = 0.0;
};

/// Replicates the area-level model with true A, beta and refits with `method`.
MseMonteCarlo mse_monte_carlo(const Matrix& X, const Vector& V, double A, const Vector& beta,
                              VarianceMethod method, long reps, std::uint64_t seed);

}  // namespace sae
