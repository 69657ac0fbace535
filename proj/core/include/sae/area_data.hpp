#pragma once

#include <string>
#include <vector>

#include "sae/numeric/linalg.hpp"

namespace sae {

using numeric::Index;
using numeric::Matrix;
using numeric::SymmetricMatrix;
using numeric::Vector;

/// Area-level data: direct estimates y, covariates X (intercept included by
/// the caller), known sampling variances V.
struct AreaDataset {
  std::vector<std::string> area_ids;
  Vector y;
  Matrix X;
  Vector V;

  Index m() const noexcept { return y.size(); }
  Index p() const noexcept { return X.cols(); }

  /// Throws TooFewAreas (m <= p), ValidationError (V <= 0, shape) or
  /// SingularDesign (rank-deficient X).
  void validate() const;

  /// True when every V_i equals V_0 within `rel_tol`.
  bool balanced(double rel_tol = 1e-12) const;

  /// Copy with every V_i replaced by `v`.
  AreaDataset with_common_V(double v) const;

  /// Rows reordered so that row k of the result is row perm[k] of this.
  AreaDataset permuted(const std::vector<Index>& perm) const;

  static AreaDataset make(Vector y, Matrix X, Vector V, std::vector<std::string> ids = {});
};

/// y | theta ~ N(theta, V) with a full sampling covariance V.
struct GeneralVModel {
  Vector y;
  Matrix X;
  SymmetricMatrix V;

  Index m() const noexcept { return y.size(); }
  Index p() const noexcept { return X.cols(); }

  void validate() const;
  static GeneralVModel from_area(const AreaDataset& data);
};

/// Intercept-only design of m rows.
Matrix intercept_design(Index m);

/// Hat-matrix diagonal h_ii = x_i^T (X^T X)^{-1} x_i.
Vector hat_diagonal(const Matrix& X);

}  // namespace sae
