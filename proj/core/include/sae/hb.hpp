#pragma once

#include <cstddef>
#include <optional>

#include "sae/area_data.hpp"

namespace sae {

enum class HbPrior { UniformA };

struct HbOptions {
  double rel_tol = 1e-9;
  std::size_t max_evaluations = 400000;
  /// Forces a degenerate posterior at this A (known-A reduction).
  std::optional<double> point_mass;
};

/// Posterior of A under pi(beta, A) = 1 with beta integrated out, held as a
/// quadrature rule with normalized weights.
struct HbPosterior {
  Vector grid;         // A nodes, increasing
  Vector log_density;  // unnormalized, shifted so the mode is 0
  Vector weights;      // posterior mass per node (sums to 1)
  double log_normalizer = 0.0;  // log of integral of exp(log_density) dA
  double E_A = 0.0;    // +inf when m <= p + 4 (posterior mean does not exist)
  double mode_A = 0.0;
  double normalizer_rel_error = 0.0;
  double mass_near_zero = 0.0;  // mass below 1e-8 * mean(V)
  bool near_zero_flag = false;  // mass_near_zero > 1%
  bool point_mass = false;
  std::size_t evaluations = 0;
};

/// Log of the unnormalized marginal posterior of A.
double log_posterior_A(const AreaDataset& data, double A);

/// Throws ImproperPosterior when m <= p + 2.
HbPosterior posterior_A(const AreaDataset& data, HbPrior prior = HbPrior::UniformA,
                        const HbOptions& opts = {});

struct HbEstimate {
  Vector theta;
  Vector g1;  // E[V(1 - B) | y]
  Vector g2;  // E[B^2 x^T (X^T D^{-1} X)^{-1} x | y]
  Vector g3;  // Var[B (y - x^T beta~(A)) | y]
  Vector variance;
  Vector E_B;
};

HbEstimate hb_estimate(const AreaDataset& data, const HbPosterior& post);

struct BalancedPosteriorB {
  double S = 0.0;
  double V = 0.0;
  Index m = 0;
  Index p = 0;
  double E_B = 0.0;
  double Var_B = 0.0;
  double mode_B = 0.0;
};

/// Exact posterior of B = V / (V + A) for equal V_i; density proportional to
/// B^{(m-p-4)/2} exp(-B S / 2V) on (0, 1).
BalancedPosteriorB balanced_posterior_B(const AreaDataset& data);
BalancedPosteriorB balanced_posterior_B(double S, double V, Index m, Index p);

struct MorrisStyleApprox {
  Vector theta;
  Vector variance;
};

/// Large-m approximation to the balanced posterior mean and variance.
MorrisStyleApprox hb_approx_morris_style(const AreaDataset& data);

struct GeneralVHb {
  HbPosterior posterior;
  Vector theta;
  SymmetricMatrix covariance;
};

double log_posterior_A(const GeneralVModel& model, double A);
GeneralVHb general_v_hb(const GeneralVModel& model, const HbOptions& opts = {});

}  // namespace sae
