#include "sae/numeric/linalg.hpp"

#include <cmath>
#include <string>

#include "sae/error.hpp"

namespace sae::numeric {

SymmetricMatrix::SymmetricMatrix(Index order) : m_(Matrix::Zero(order, order)) {}

SymmetricMatrix SymmetricMatrix::from_dense(const Matrix& m) {
  if (m.rows() != m.cols()) {
    fail(ErrorCode::InvalidArgument, "symmetric matrix must be square");
  }
  SymmetricMatrix s;
  s.m_ = 0.5 * (m + m.transpose());
  return s;
}

SymmetricMatrix SymmetricMatrix::identity(Index order) {
  SymmetricMatrix s;
  s.m_ = Matrix::Identity(order, order);
  return s;
}

SymmetricMatrix SymmetricMatrix::diagonal(const Vector& d) {
  SymmetricMatrix s;
  s.m_ = d.asDiagonal();
  return s;
}

void SymmetricMatrix::set(Index i, Index j, double value) {
  m_(i, j) = value;
  m_(j, i) = value;
}

void SymmetricMatrix::add_to_diagonal(double value) { m_.diagonal().array() += value; }

SpdFactor::SpdFactor(const SymmetricMatrix& m) : llt_(m.dense()) {
  if (llt_.info() != Eigen::Success) {
    fail(ErrorCode::NotPositiveDefinite,
         "Cholesky pivot <= 0 in matrix of order " + std::to_string(m.order()));
  }
  const auto diag = llt_.matrixLLT().diagonal();
  for (Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) {
      fail(ErrorCode::NotPositiveDefinite,
           "non-positive Cholesky pivot at index " + std::to_string(i));
    }
  }
}

Vector SpdFactor::solve(const Vector& b) const { return llt_.solve(b); }

Matrix SpdFactor::solve(const Matrix& b) const { return llt_.solve(b); }

SymmetricMatrix SpdFactor::inverse() const {
  return SymmetricMatrix::from_dense(llt_.solve(Matrix::Identity(order(), order())));
}

double SpdFactor::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

double SpdFactor::inverse_quadratic_form(const Vector& b) const {
  const Vector z = llt_.matrixL().solve(b);
  return z.squaredNorm();
}

Vector solve_spd(const SymmetricMatrix& m, const Vector& b) {
  if (b.size() != m.order()) {
    fail(ErrorCode::InvalidArgument, "solve_spd: dimension mismatch");
  }
  return SpdFactor(m).solve(b);
}

SymmetricMatrix inverse_spd(const SymmetricMatrix& m) { return SpdFactor(m).inverse(); }

SymmetricMatrix weighted_cross_product(const Matrix& x, const Vector& w) {
  return SymmetricMatrix::from_dense(x.transpose() * w.asDiagonal() * x);
}

SymmetricMatrix cross_product(const Matrix& x) {
  return SymmetricMatrix::from_dense(x.transpose() * x);
}

Index numerical_rank(const Matrix& x, double rel_tol) {
  if (x.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(rel_tol);
  return qr.rank();
}

}  // namespace sae::numeric
