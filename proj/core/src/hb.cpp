#include "sae/hb.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "sae/error.hpp"
#include "sae/fay_herriot.hpp"
#include "sae/numeric/quadrature.hpp"
#include "sae/numeric/roots.hpp"
#include "detail/halfline_frame.hpp"

namespace sae {
namespace {

using numeric::SpdFactor;

// Everything the area-level functionals need at one value of A.
struct AreaNode {
  double log_density;
  Eigen::ArrayXd B;
  Eigen::ArrayXd fit;  // x_i^T beta~(A)
  Eigen::ArrayXd lev;  // x_i^T (X^T D^{-1} X)^{-1} x_i
};

AreaNode area_node(const AreaDataset& data, double A) {
  const Index m = data.m();
  AreaNode n;
  if (!std::isfinite(A)) {
    n.log_density = -std::numeric_limits<double>::infinity();
    n.B = Eigen::ArrayXd::Zero(m);
    n.fit = Eigen::ArrayXd::Zero(m);
    n.lev = Eigen::ArrayXd::Zero(m);
    return n;
  }
  const Eigen::ArrayXd D = data.V.array() + A;
  // Weights scaled by max D keep X^T D^{-1} X away from underflow at large A.
  const double c = D.maxCoeff();
  const Vector w = (c / D).matrix();
  const SpdFactor info(numeric::weighted_cross_product(data.X, w));
  const Vector beta = info.solve(Vector(data.X.transpose() * w.asDiagonal() * data.y));
  n.fit = (data.X * beta).array();
  const Eigen::ArrayXd r = data.y.array() - n.fit;
  const double log_det_info = info.log_det() - static_cast<double>(data.p()) * std::log(c);
  n.log_density = -0.5 * D.log().sum() - 0.5 * log_det_info - 0.5 * (r.square() / D).sum();
  n.B = data.V.array() / D;
  const Matrix sol = info.solve(Matrix(data.X.transpose()));
  n.lev = c * (data.X.array() * sol.transpose().array()).rowwise().sum();
  return n;
}

void check_proper(Index m, Index p) {
  if (m <= p + 2) {
    fail(ErrorCode::ImproperPosterior,
         "posterior of A under a flat prior needs m > p + 2 (m=" + std::to_string(m) +
             ", p=" + std::to_string(p) + ")");
  }
}

}  // namespace

double log_posterior_A(const AreaDataset& data, double A) { return area_node(data, A).log_density; }

HbPosterior posterior_A(const AreaDataset& data, HbPrior prior, const HbOptions& opts) {
  (void)prior;
  data.validate();
  check_proper(data.m(), data.p());
  if (opts.point_mass) return detail::point_mass_posterior(*opts.point_mass, log_posterior_A(data, *opts.point_mass));
  const Index m = data.m();
  auto ld = [&](double A) { return log_posterior_A(data, A); };
  auto extra = [&](double A, std::span<double> out) {
    const AreaNode nd = area_node(data, A);
    for (Index i = 0; i < m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double u = nd.B(i) * (data.y(i) - nd.fit(i));
      out[4 * k] = nd.B(i);
      out[4 * k + 1] = nd.B(i) * nd.fit(i);
      out[4 * k + 2] = nd.B(i) * nd.B(i) * nd.lev(i);
      out[4 * k + 3] = u * u;
    }
  };
  return detail::build_posterior(ld, m > data.p() + 4, data.V.mean(), static_cast<std::size_t>(4 * m), extra, opts);
}

HbEstimate hb_estimate(const AreaDataset& data, const HbPosterior& post) {
  const Index m = data.m();
  HbEstimate e;
  e.E_B = Vector::Zero(m);
  Vector Bfit = Vector::Zero(m), Eu = Vector::Zero(m);
  e.g1 = Vector::Zero(m);
  e.g2 = Vector::Zero(m);
  e.g3 = Vector::Zero(m);
  std::vector<Eigen::ArrayXd> us;
  us.reserve(static_cast<std::size_t>(post.grid.size()));
  for (Index k = 0; k < post.grid.size(); ++k) {
    const double w = post.weights(k);
    const AreaNode nd = area_node(data, post.grid(k));
    const Eigen::ArrayXd u = nd.B * (data.y.array() - nd.fit);
    e.E_B.array() += w * nd.B;
    Bfit.array() += w * nd.B * nd.fit;
    e.g2.array() += w * nd.B.square() * nd.lev;
    Eu.array() += w * u;
    us.push_back(u);
  }
  for (Index k = 0; k < post.grid.size(); ++k) {
    e.g3.array() += post.weights(k) * (us[static_cast<std::size_t>(k)] - Eu.array()).square();
  }
  e.g1 = (data.V.array() * (1.0 - e.E_B.array())).matrix();
  e.theta = ((1.0 - e.E_B.array()) * data.y.array() + Bfit.array()).matrix();
  e.variance = e.g1 + e.g2 + e.g3;
  return e;
}

BalancedPosteriorB balanced_posterior_B(const AreaDataset& data) {
  if (data.m() <= data.p() + 2) fail(ErrorCode::TooFewAreas, "posterior of B needs m > p + 2");
  const BalancedFit b = balanced_fit(data);
  return balanced_posterior_B(b.S, b.V_common, data.m(), data.p());
}

BalancedPosteriorB balanced_posterior_B(double S, double V, Index m, Index p) {
  if (m <= p + 2) fail(ErrorCode::TooFewAreas, "posterior of B needs m > p + 2");
  if (!(V > 0.0) || !(S >= 0.0)) fail(ErrorCode::DomainError, "posterior of B needs V > 0, S >= 0");
  BalancedPosteriorB r{S, V, m, p, 0.0, 0.0, 0.0};
  const double a = 0.5 * static_cast<double>(m - p - 2);
  const double c = S / (2.0 * V);
  double e1, e2;
  if (c < 1e-8) {
    e1 = a / (a + 1.0);
    e2 = a / (a + 2.0);
  } else {
    using boost::math::gamma_p;
    const double P0 = gamma_p(a, c);
    e1 = a * gamma_p(a + 1.0, c) / (c * P0);
    e2 = a * (a + 1.0) * gamma_p(a + 2.0, c) / (c * c * P0);
  }
  r.E_B = e1;
  r.Var_B = std::max(0.0, e2 - e1 * e1);
  const double k = static_cast<double>(m - p - 4);
  r.mode_B = S > 0.0 ? std::clamp(k * V / S, 0.0, 1.0) : (k > 0.0 ? 1.0 : 0.0);
  return r;
}

MorrisStyleApprox hb_approx_morris_style(const AreaDataset& data) {
  const BalancedFit b = balanced_fit(data);
  const double k = static_cast<double>(data.m() - data.p() - 2);
  MorrisStyleApprox out;
  if (b.degenerate) {
    out.theta = b.fitted;
    out.variance = (b.V_common * b.h_diag.array()).matrix();
    return out;
  }
  const double B = b.B_hat_eb;
  const Eigen::ArrayXd r = data.y.array() - b.fitted.array();
  out.theta = ((1.0 - B) * data.y.array() + B * b.fitted.array()).matrix();
  out.variance = (b.V_common * (1.0 - B) + b.V_common * B * b.h_diag.array() +
                  2.0 * B * B * r.square() / k).matrix();
  return out;
}

namespace {

// V + A I divided by c = max diagonal, with the scaled information matrix.
struct ScaledSystem {
  double c;
  SpdFactor Df;
  Matrix DinvX;
  SpdFactor info;
  Vector beta;

  ScaledSystem(const GeneralVModel& model, double A)
      : c(model.V.dense().diagonal().maxCoeff() + A), Df(scaled(model, A, c)), DinvX(Df.solve(model.X)),
        info(SymmetricMatrix::from_dense(model.X.transpose() * DinvX)),
        beta(info.solve(Vector(DinvX.transpose() * model.y))) {}

  static SymmetricMatrix scaled(const GeneralVModel& model, double A, double c) {
    SymmetricMatrix D = model.V;
    D.add_to_diagonal(A);
    return SymmetricMatrix::from_dense(D.dense() / c);
  }
};

}  // namespace

double log_posterior_A(const GeneralVModel& model, double A) {
  if (!std::isfinite(A)) return -std::numeric_limits<double>::infinity();
  const ScaledSystem sys(model, A);
  const Vector r = model.y - model.X * sys.beta;
  const double m = static_cast<double>(model.m()), p = static_cast<double>(model.p());
  const double log_c = std::log(sys.c);
  return -0.5 * (sys.Df.log_det() + m * log_c) - 0.5 * (sys.info.log_det() - p * log_c) -
         0.5 * sys.Df.inverse_quadratic_form(r) / sys.c;
}

GeneralVHb general_v_hb(const GeneralVModel& model, const HbOptions& opts) {
  model.validate();
  check_proper(model.m(), model.p());
  const Index m = model.m();
  const Matrix& V = model.V.dense();

  struct Node {
    Vector Br;        // B (y - X beta~)
    Matrix cond_var;  // V(I - B) + B X (X^T D^{-1} X)^{-1} X^T B^T
  };
  auto node = [&](double A) {
    const ScaledSystem sys(model, A);
    const Matrix B = sys.Df.solve(V) / sys.c;
    Node n;
    n.Br = B * (model.y - model.X * sys.beta);
    const Matrix BX = B * model.X;
    n.cond_var = V * (Matrix::Identity(m, m) - B) + sys.c * BX * sys.info.solve(Matrix(BX.transpose()));
    return n;
  };

  GeneralVHb out;
  if (opts.point_mass) {
    out.posterior = detail::point_mass_posterior(*opts.point_mass, log_posterior_A(model, *opts.point_mass));
  } else {
    auto ld = [&](double A) { return log_posterior_A(model, A); };
    auto extra = [&](double A, std::span<double> o) {
      const Node n = node(A);
      for (Index i = 0; i < m; ++i) {
        o[static_cast<std::size_t>(2 * i)] = n.Br(i);
        o[static_cast<std::size_t>(2 * i + 1)] = n.Br(i) * n.Br(i);
      }
    };
    const double v_mean = V.diagonal().mean();
    out.posterior = detail::build_posterior(ld, m > model.p() + 4, v_mean, static_cast<std::size_t>(2 * m), extra, opts);
  }
  const HbPosterior& post = out.posterior;
  Vector EBr = Vector::Zero(m);
  Matrix EC = Matrix::Zero(m, m);
  std::vector<Vector> brs;
  for (Index k = 0; k < post.grid.size(); ++k) {
    const Node n = node(post.grid(k));
    EBr += post.weights(k) * n.Br;
    EC += post.weights(k) * n.cond_var;
    brs.push_back(n.Br);
  }
  Matrix cov = Matrix::Zero(m, m);
  for (Index k = 0; k < post.grid.size(); ++k) {
    const Vector c = brs[static_cast<std::size_t>(k)] - EBr;
    cov += post.weights(k) * c * c.transpose();
  }
  out.theta = model.y - EBr;
  out.covariance = SymmetricMatrix::from_dense(EC + cov);
  return out;
}

}  // namespace sae
