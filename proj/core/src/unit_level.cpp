#include "sae/unit_level.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "detail/unit_profile.hpp"
#include "sae/error.hpp"
#include "sae/numeric/roots.hpp"

namespace sae {
namespace {

using numeric::SpdFactor;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void require_components(const VarianceComponents& psi) {
  if (!(psi.sigma2_e > 0.0) || !std::isfinite(psi.sigma2_e)) {
    fail(ErrorCode::DomainError, "sigma2_e must be positive");
  }
  if (!(psi.sigma2_v >= 0.0) || !std::isfinite(psi.sigma2_v)) {
    fail(ErrorCode::DomainError, "sigma2_v must be >= 0");
  }
}

detail::UnitProfile profile_at(const UnitDataset& d, const VarianceComponents& psi) {
  require_components(psi);
  return detail::unit_profile(d, detail::omega_from_rho(d, psi.sigma2_v / psi.sigma2_e));
}

struct AnovaDesign {
  Index p_star = 0;
  double n_star = 0.0;
  double n_star2 = 0.0;  // tr[(Z^T M Z)^2]
  double within_sse = 0.0;
  double total_sse = 0.0;
};

AnovaDesign anova_design(const UnitDataset& d) {
  AnovaDesign a;
  const Index n = d.n(), p = d.p(), m = d.m();
  Matrix Xc(n, p);
  Vector yc(n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = d.offset(i); j < d.offset(i) + d.n_i(i); ++j) {
      Xc.row(j) = d.X().row(j) - d.xbar_s().row(i);
      yc(j) = d.y()(j) - d.ybar_s()(i);
    }
  }
  a.p_star = Xc.norm() > 0.0 ? numeric::numerical_rank(Xc) : 0;
  if (a.p_star > 0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Xc);
    cod.setThreshold(1e-10);
    a.within_sse = (yc - Xc * cod.solve(yc)).squaredNorm();
  } else {
    a.within_sse = yc.squaredNorm();
  }

  const SpdFactor xtx(numeric::cross_product(d.X()));
  const Vector beta = xtx.solve(Vector(d.X().transpose() * d.y()));
  a.total_sse = (d.y() - d.X() * beta).squaredNorm();

  // Z^T X has rows n_i xbar_i^T.
  Matrix ZtX = d.xbar_s();
  for (Index i = 0; i < m; ++i) ZtX.row(i) *= static_cast<double>(d.n_i(i));
  Matrix G = -ZtX * xtx.solve(Matrix(ZtX.transpose()));
  for (Index i = 0; i < m; ++i) G(i, i) += static_cast<double>(d.n_i(i));
  a.n_star = G.trace();
  a.n_star2 = G.squaredNorm();
  return a;
}

// Fisher information for (sigma2_v, sigma2_e) under the likelihood.
Eigen::Matrix2d fisher(const UnitDataset& d, const VarianceComponents& psi) {
  const double e2 = psi.sigma2_e * psi.sigma2_e;
  Eigen::Matrix2d I = Eigen::Matrix2d::Zero();
  for (Index i = 0; i < d.m(); ++i) {
    const double ni = static_cast<double>(d.n_i(i));
    const double w = psi.sigma2_e / (psi.sigma2_e + ni * psi.sigma2_v);
    I(0, 0) += ni * ni * w * w;
    I(0, 1) += ni * w * w;
    I(1, 1) += (ni - 1.0) + w * w;
  }
  I(1, 0) = I(0, 1);
  return 0.5 * I / e2;
}

double log_lik_rho(const UnitDataset& d, double rho, bool restricted) {
  const detail::UnitProfile pr = detail::unit_profile(d, detail::omega_from_rho(d, rho));
  const double dof = static_cast<double>(restricted ? d.n() - d.p() : d.n());
  if (!(pr.sse > 0.0)) return std::numeric_limits<double>::infinity();
  double logdet = 0.0;
  for (Index i = 0; i < d.m(); ++i) logdet += std::log1p(static_cast<double>(d.n_i(i)) * rho);
  double l = dof * std::log(pr.sse / dof) + logdet;
  if (restricted) l += pr.factor->log_det();
  return -0.5 * l;
}

}  // namespace

UnitDataset UnitDataset::make(const std::vector<std::string>& unit_area, const Vector& y,
                              const Matrix& X, std::vector<std::string> area_ids, const Vector& N,
                              const Matrix& Xbar) {
  if (static_cast<Index>(unit_area.size()) != y.size() || X.rows() != y.size()) {
    fail(ErrorCode::ValidationError, "unit rows: area labels, y and X differ in length");
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < area_ids.size(); ++i) {
    if (!index.emplace(area_ids[i], i).second) {
      fail(ErrorCode::ValidationError, "duplicate area id '" + area_ids[i] + "'");
    }
  }
  std::vector<std::vector<Index>> rows(area_ids.size());
  for (std::size_t k = 0; k < unit_area.size(); ++k) {
    const auto it = index.find(unit_area[k]);
    if (it == index.end()) {
      fail(ErrorCode::ValidationError,
           "unit row " + std::to_string(k + 1) + ": unknown area '" + unit_area[k] + "'");
    }
    rows[it->second].push_back(static_cast<Index>(k));
  }
  std::vector<Index> n;
  Vector ys(y.size());
  Matrix Xs(X.rows(), X.cols());
  Index r = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    n.push_back(static_cast<Index>(rows[i].size()));
    for (const Index k : rows[i]) {
      ys(r) = y(k);
      Xs.row(r) = X.row(k);
      ++r;
    }
  }
  return from_grouped(n, ys, Xs, N, Xbar, std::move(area_ids));
}

UnitDataset UnitDataset::from_grouped(const std::vector<Index>& n, const Vector& y,
                                      const Matrix& X, const Vector& N, const Matrix& Xbar,
                                      std::vector<std::string> area_ids) {
  UnitDataset d;
  const auto m = static_cast<Index>(n.size());
  if (area_ids.empty()) {
    for (Index i = 0; i < m; ++i) area_ids.push_back(std::to_string(i + 1));
  }
  if (static_cast<Index>(area_ids.size()) != m || N.size() != m || Xbar.rows() != m) {
    fail(ErrorCode::ValidationError, "area-level inputs must have one entry per area");
  }
  d.ids_ = std::move(area_ids);
  d.offsets_.assign(1, 0);
  for (Index i = 0; i < m; ++i) {
    if (n[static_cast<std::size_t>(i)] < 1) {
      fail(ErrorCode::ValidationError, "area '" + d.ids_[static_cast<std::size_t>(i)] + "' has no sampled units");
    }
    d.offsets_.push_back(d.offsets_.back() + n[static_cast<std::size_t>(i)]);
  }
  d.y_ = y;
  d.X_ = X;
  d.N_ = N;
  d.Xbar_ = Xbar;
  d.finish();
  return d;
}

UnitDataset UnitDataset::with_response(const Vector& y) const {
  if (y.size() != n()) fail(ErrorCode::ValidationError, "response length does not match");
  UnitDataset d = *this;
  d.y_ = y;
  d.finish();
  return d;
}

void UnitDataset::finish() {
  const Index mm = m(), nn = n(), pp = p();
  if (offsets_.back() != nn || X_.rows() != nn) {
    fail(ErrorCode::ValidationError, "unit rows do not match the area sizes");
  }
  if (Xbar_.cols() != pp) fail(ErrorCode::ValidationError, "Xbar must have p columns");
  if (!y_.allFinite() || !X_.allFinite() || !N_.allFinite() || !Xbar_.allFinite()) {
    fail(ErrorCode::ValidationError, "non-finite input value");
  }
  if (nn <= mm + pp) fail(ErrorCode::ValidationError, "need n > m + p sampled units");

  ybar_.resize(mm);
  xbar_.resize(mm, pp);
  xbar_u_.resize(mm, pp);
  f_.resize(mm);
  xtx_.assign(static_cast<std::size_t>(mm), Matrix());
  xty_.assign(static_cast<std::size_t>(mm), Vector());
  yty_.resize(mm);
  wxx_ = Matrix::Zero(pp, pp);
  wxy_ = Vector::Zero(pp);
  wyy_ = 0.0;
  for (Index i = 0; i < mm; ++i) {
    const Index ni = n_i(i);
    const auto Xi = X_.middleRows(offset(i), ni);
    const auto yi = y_.segment(offset(i), ni);
    const double nd = static_cast<double>(ni);
    if (!(N_(i) >= nd)) {
      fail(ErrorCode::ValidationError, "area '" + ids_[static_cast<std::size_t>(i)] + "': N_i < n_i");
    }
    ybar_(i) = yi.mean();
    xbar_.row(i) = Xi.colwise().mean();
    f_(i) = nd / N_(i);
    if (N_(i) > nd) {
      xbar_u_.row(i) = (N_(i) * Xbar_.row(i) - nd * xbar_.row(i)) / (N_(i) - nd);
    } else {
      xbar_u_.row(i) = xbar_.row(i);
    }
    const auto k = static_cast<std::size_t>(i);
    xtx_[k] = Xi.transpose() * Xi;
    xty_[k] = Xi.transpose() * yi;
    yty_(i) = yi.squaredNorm();
    const Matrix Xc = Xi.rowwise() - xbar_.row(i);
    const Vector yc = yi.array() - ybar_(i);
    wxx_.noalias() += Xc.transpose() * Xc;
    wxy_.noalias() += Xc.transpose() * yc;
    wyy_ += yc.squaredNorm();
  }
  if (numeric::numerical_rank(X_) < pp) fail(ErrorCode::SingularDesign, "unit design is rank deficient");
}

std::string_view to_string(UnitMethod method) noexcept {
  switch (method) {
    case UnitMethod::ANOVA: return "ANOVA";
    case UnitMethod::ML: return "ML";
    case UnitMethod::REML: return "REML";
  }
  return "?";
}

UnitMethod parse_unit_method(std::string_view name) {
  const std::string s = lower(name);
  if (s == "anova" || s == "pr" || s == "pr_anova") return UnitMethod::ANOVA;
  if (s == "ml") return UnitMethod::ML;
  if (s == "reml") return UnitMethod::REML;
  fail(ErrorCode::ValidationError, "unknown unit-level method '" + std::string(name) + "'");
}

Vector unit_gls(const UnitDataset& data, const VarianceComponents& psi) {
  return profile_at(data, psi).beta;
}

SymmetricMatrix unit_information(const UnitDataset& data, const VarianceComponents& psi) {
  const detail::UnitProfile pr = profile_at(data, psi);
  return SymmetricMatrix::from_dense(pr.M.dense() / psi.sigma2_e);
}

VarianceComponents anova_components(const UnitDataset& data) {
  const AnovaDesign a = anova_design(data);
  const Index df = data.n() - data.m() - a.p_star;
  if (df <= 0) fail(ErrorCode::InsufficientWithinVariation, "n - m - p* must be positive");
  VarianceComponents psi;
  psi.method = UnitMethod::ANOVA;
  psi.p_star = a.p_star;
  psi.n_star = a.n_star;
  psi.sigma2_e = a.within_sse / static_cast<double>(df);
  psi.sigma2_v_raw =
      (a.total_sse - static_cast<double>(data.n() - data.p()) * psi.sigma2_e) / a.n_star;
  psi.truncated = psi.sigma2_v_raw < 0.0;
  psi.sigma2_v = std::max(0.0, psi.sigma2_v_raw);
  return psi;
}

VarianceComponents likelihood_components(const UnitDataset& data, bool restricted) {
  const AnovaDesign a = anova_design(data);
  VarianceComponents psi;
  psi.method = restricted ? UnitMethod::REML : UnitMethod::ML;
  psi.p_star = a.p_star;
  psi.n_star = a.n_star;

  auto nll = [&](double rho) { return -log_lik_rho(data, rho, restricted); };
  constexpr int kGrid = 160;
  const double lo = 1e-8, hi = 1e8;
  std::vector<double> grid{0.0};
  for (int k = 0; k <= kGrid; ++k) grid.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / kGrid));
  std::size_t best = 0;
  double best_val = nll(0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double v = nll(grid[k]);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  if (!std::isfinite(best_val)) {
    // Exact fit on every grid point: y lies in the column space of X.
    psi.sigma2_e = 0.0;
    psi.sigma2_v = 0.0;
    return psi;
  }
  double rho = grid[best];
  if (best > 0) {
    const double a_lo = grid[best - 1];
    const double a_hi = grid[std::min(best + 1, grid.size() - 1)];
    const auto mn = numeric::brent_minimize(nll, a_lo, a_hi, 52);
    if (mn.fx <= best_val) rho = mn.x;
  }
  const detail::UnitProfile pr = detail::unit_profile(data, detail::omega_from_rho(data, rho));
  const double dof = static_cast<double>(restricted ? data.n() - data.p() : data.n());
  psi.sigma2_e = pr.sse / dof;
  psi.sigma2_v = rho * psi.sigma2_e;
  psi.sigma2_v_raw = psi.sigma2_v;
  return psi;
}

VarianceComponents estimate_components(const UnitDataset& data, UnitMethod method) {
  switch (method) {
    case UnitMethod::ANOVA: return anova_components(data);
    case UnitMethod::ML: return likelihood_components(data, false);
    case UnitMethod::REML: return likelihood_components(data, true);
  }
  fail(ErrorCode::InvalidArgument, "unknown unit-level method");
}

UnitFit unit_blup(const UnitDataset& data, const VarianceComponents& psi) {
  const detail::UnitProfile pr = profile_at(data, psi);
  UnitFit fit;
  fit.beta = pr.beta;
  const Index m = data.m();
  fit.delta = (1.0 - pr.omega.array()).matrix();
  fit.theta.resize(m);
  fit.theta_u.resize(m);
  fit.gamma.resize(m);
  for (Index i = 0; i < m; ++i) {
    const double resid = data.ybar_s()(i) - data.xbar_s().row(i).dot(pr.beta);
    fit.theta(i) = data.Xbar().row(i).dot(pr.beta) + fit.delta(i) * resid;
    fit.theta_u(i) = data.xbar_u().row(i).dot(pr.beta) + fit.delta(i) * resid;
    const double f = data.f()(i);
    fit.gamma(i) = f >= 1.0 ? data.ybar_s()(i) : f * data.ybar_s()(i) + (1.0 - f) * fit.theta_u(i);
  }
  return fit;
}

Eigen::Matrix2d unit_component_covariance(const UnitDataset& data, const VarianceComponents& psi) {
  require_components(psi);
  if (psi.method != UnitMethod::ANOVA) return fisher(data, psi).inverse();

  const AnovaDesign a = anova_design(data);
  const double n = static_cast<double>(data.n()), m = static_cast<double>(data.m());
  const double p = static_cast<double>(data.p()), ps = static_cast<double>(a.p_star);
  const double df = n - m - ps;
  const double se2 = psi.sigma2_e, sv2 = psi.sigma2_v;
  const double e4 = se2 * se2;
  Eigen::Matrix2d C;
  C(1, 1) = 2.0 * e4 / df;
  C(0, 1) = C(1, 0) = 2.0 * e4 * (p - m - ps) / (a.n_star * df);
  C(0, 0) = 2.0 / (a.n_star * a.n_star) *
            (e4 * (n - p) * (m + ps - p) / df + 2.0 * a.n_star * se2 * sv2 + a.n_star2 * sv2 * sv2);
  return C;
}

Eigen::Vector2d unit_component_bias(const UnitDataset& data, const VarianceComponents& psi) {
  require_components(psi);
  if (psi.method != UnitMethod::ML) return Eigen::Vector2d::Zero();
  const detail::UnitProfile pr = profile_at(data, psi);
  const Index p = data.p();
  // X^T Sigma^{-1} X = pr.M / sigma2_e; the middle terms carry sigma2_e^{-2}.
  Matrix Tv = Matrix::Zero(p, p), Te = Matrix::Zero(p, p);
  for (Index i = 0; i < data.m(); ++i) {
    const double ni = static_cast<double>(data.n_i(i));
    const double w = pr.omega(i), dl = 1.0 - w;
    const Vector xb = data.xbar_s().row(i).transpose();
    const Matrix outer = xb * xb.transpose();
    Tv += w * w * ni * ni * outer;
    Te += data.xtx()[static_cast<std::size_t>(i)] + (dl * dl - 2.0 * dl) * ni * outer;
  }
  const Matrix Minv = pr.factor->inverse().dense();
  const double se2 = psi.sigma2_e;
  Eigen::Vector2d s;
  s(0) = 0.5 * (Minv * Tv).trace() / se2;
  s(1) = 0.5 * (Minv * Te).trace() / se2;
  return -fisher(data, psi).inverse() * s;
}

MseDecomposition unit_mse(const UnitDataset& data, const VarianceComponents& psi) {
  const detail::UnitProfile pr = profile_at(data, psi);
  const Eigen::Matrix2d C = unit_component_covariance(data, psi);
  const Eigen::Vector2d b = unit_component_bias(data, psi);
  const Index m = data.m();
  const double se2 = psi.sigma2_e, sv2 = psi.sigma2_v;
  const double var_comb =
      sv2 * sv2 * C(1, 1) + se2 * se2 * C(0, 0) - 2.0 * sv2 * se2 * C(0, 1);

  MseDecomposition out;
  out.kind = MseKind::SECOND_ORDER;
  out.boundary_warning = !(sv2 > 0.0);
  out.g1.resize(m);
  out.g2.resize(m);
  out.g3.resize(m);
  out.bias_term.resize(m);
  for (Index i = 0; i < m; ++i) {
    const double ni = static_cast<double>(data.n_i(i));
    const double dl = 1.0 - pr.omega(i);
    out.g1(i) = pr.omega(i) * sv2;
    const Vector h = (data.Xbar().row(i) - dl * data.xbar_s().row(i)).transpose();
    out.g2(i) = se2 * pr.factor->inverse_quadratic_form(h);
    const double t = sv2 + se2 / ni;
    out.g3(i) = var_comb / (ni * ni * t * t * t);
    const double den = ni * sv2 + se2;
    out.bias_term(i) = (b(0) * se2 * se2 + b(1) * ni * sv2 * sv2) / (den * den);
  }
  out.total = out.g1 + out.g2 + 2.0 * out.g3 - out.bias_term;
  return out;
}

}  // namespace sae
