#include "sae/area_data.hpp"

#include <cmath>

#include "sae/error.hpp"

namespace sae {

void AreaDataset::validate() const {
  if (X.rows() != y.size() || V.size() != y.size()) {
    fail(ErrorCode::ValidationError, "area data: y, X and V disagree in length");
  }
  if (!area_ids.empty() && static_cast<Index>(area_ids.size()) != m()) {
    fail(ErrorCode::ValidationError, "area data: id count differs from m");
  }
  if (m() <= p()) {
    fail(ErrorCode::TooFewAreas, "area data: need m > p (m=" + std::to_string(m()) +
                                     ", p=" + std::to_string(p()) + ")");
  }
  for (Index i = 0; i < m(); ++i) {
    if (!std::isfinite(y(i))) fail(ErrorCode::ValidationError, "area data: non-finite y at row " + std::to_string(i));
    if (!(V(i) > 0.0) || !std::isfinite(V(i))) {
      fail(ErrorCode::ValidationError, "area data: V must be positive (row " + std::to_string(i) + ")");
    }
  }
  if (!X.allFinite()) fail(ErrorCode::ValidationError, "area data: non-finite covariate");
  if (numeric::numerical_rank(X) < p()) {
    fail(ErrorCode::SingularDesign, "area data: covariate matrix is rank deficient");
  }
}

bool AreaDataset::balanced(double rel_tol) const {
  if (m() == 0) return true;
  const double v0 = V(0);
  for (Index i = 1; i < m(); ++i) {
    if (std::fabs(V(i) - v0) > rel_tol * std::fabs(v0)) return false;
  }
  return true;
}

AreaDataset AreaDataset::with_common_V(double v) const {
  AreaDataset d = *this;
  d.V.setConstant(v);
  return d;
}

AreaDataset AreaDataset::permuted(const std::vector<Index>& perm) const {
  AreaDataset d;
  const Index n = static_cast<Index>(perm.size());
  d.y.resize(n);
  d.V.resize(n);
  d.X.resize(n, p());
  for (Index k = 0; k < n; ++k) {
    const Index src = perm[static_cast<std::size_t>(k)];
    d.y(k) = y(src);
    d.V(k) = V(src);
    d.X.row(k) = X.row(src);
    if (!area_ids.empty()) d.area_ids.push_back(area_ids[static_cast<std::size_t>(src)]);
  }
  return d;
}

AreaDataset AreaDataset::make(Vector y, Matrix X, Vector V, std::vector<std::string> ids) {
  AreaDataset d{std::move(ids), std::move(y), std::move(X), std::move(V)};
  if (d.area_ids.empty()) {
    for (Index i = 0; i < d.m(); ++i) d.area_ids.push_back(std::to_string(i + 1));
  }
  d.validate();
  return d;
}

void GeneralVModel::validate() const {
  if (X.rows() != y.size() || V.order() != y.size()) {
    fail(ErrorCode::ValidationError, "general-V model: dimension mismatch");
  }
  if (m() <= p()) fail(ErrorCode::TooFewAreas, "general-V model: need m > p");
  if (numeric::numerical_rank(X) < p()) {
    fail(ErrorCode::SingularDesign, "general-V model: covariate matrix is rank deficient");
  }
  numeric::SpdFactor check(V);
  (void)check;
}

GeneralVModel GeneralVModel::from_area(const AreaDataset& data) {
  return {data.y, data.X, SymmetricMatrix::diagonal(data.V)};
}

Matrix intercept_design(Index m) { return Matrix::Ones(m, 1); }

Vector hat_diagonal(const Matrix& X) {
  const numeric::SpdFactor xtx(numeric::cross_product(X));
  const Matrix sol = xtx.solve(Matrix(X.transpose()));
  return (X.array() * sol.transpose().array()).rowwise().sum();
}

}  // namespace sae
