#pragma once

#include <algorithm>
#include <optional>

#include "sae/error.hpp"
#include "sae/unit_level.hpp"

namespace sae::detail {

// GLS pieces at sigma2_e = 1 for per-area shrinkage complements omega_i = 1 - delta_i.
struct UnitProfile {
  Vector omega;
  SymmetricMatrix M;  // X^T Sigma^{-1} X
  std::optional<numeric::SpdFactor> factor;
  Vector beta;
  double sse = 0.0;  // (y - X beta)^T Sigma^{-1} (y - X beta)
};

inline UnitProfile unit_profile(const UnitDataset& d, const Vector& omega) {
  UnitProfile pr;
  pr.omega = omega;
  Matrix M = d.within_xx();
  Vector b = d.within_xy();
  double yy = d.within_yy();
  for (Index i = 0; i < d.m(); ++i) {
    const double w = omega(i) * static_cast<double>(d.n_i(i));
    const Vector xb = d.xbar_s().row(i).transpose();
    const double yb = d.ybar_s()(i);
    M.noalias() += w * xb * xb.transpose();
    b += (w * yb) * xb;
    yy += w * yb * yb;
  }
  pr.M = SymmetricMatrix::from_dense(M);
  try {
    pr.factor.emplace(pr.M);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotPositiveDefinite) {
      fail(ErrorCode::SingularDesign, "X^T Sigma^{-1} X is not invertible");
    }
    throw;
  }
  pr.beta = pr.factor->solve(b);
  pr.sse = std::max(0.0, yy - b.dot(pr.beta));
  return pr;
}

// omega_i = 1 / (1 + n_i rho), rho = sigma2_v / sigma2_e.
inline Vector omega_from_rho(const UnitDataset& d, double rho) {
  Vector w(d.m());
  for (Index i = 0; i < d.m(); ++i) w(i) = 1.0 / (1.0 + static_cast<double>(d.n_i(i)) * rho);
  return w;
}

}  // namespace sae::detail
