#pragma once

#include <Eigen/Dense>

namespace sae::numeric {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Dense symmetric matrix. Symmetry is enforced at construction, so every
/// accessor sees an exactly symmetric array.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(Index order);

  /// Symmetrizes as (M + M^T) / 2.
  static SymmetricMatrix from_dense(const Matrix& m);
  static SymmetricMatrix identity(Index order);
  static SymmetricMatrix diagonal(const Vector& d);

  Index order() const noexcept { return m_.rows(); }
  double operator()(Index i, Index j) const { return m_(i, j); }
  void set(Index i, Index j, double value);
  void add_to_diagonal(double value);
  const Matrix& dense() const noexcept { return m_; }

 private:
  Matrix m_;
};

/// Cholesky factor of a symmetric positive definite matrix; throws
/// NotPositiveDefinite on a non-positive pivot.
class SpdFactor {
 public:
  explicit SpdFactor(const SymmetricMatrix& m);

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  SymmetricMatrix inverse() const;
  double log_det() const;
  /// b^T M^{-1} b
  double inverse_quadratic_form(const Vector& b) const;
  Index order() const noexcept { return llt_.rows(); }

 private:
  Eigen::LLT<Matrix> llt_;
};

Vector solve_spd(const SymmetricMatrix& m, const Vector& b);
SymmetricMatrix inverse_spd(const SymmetricMatrix& m);

/// X^T diag(w) X
SymmetricMatrix weighted_cross_product(const Matrix& x, const Vector& w);
/// X^T X
SymmetricMatrix cross_product(const Matrix& x);

/// Column rank by column-pivoted QR with relative threshold.
Index numerical_rank(const Matrix& x, double rel_tol = 1e-10);

}  // namespace sae::numeric
