#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "detail/halfline_frame.hpp"
#include "detail/unit_profile.hpp"
#include "sae/error.hpp"
#include "sae/unit_level.hpp"

namespace sae {
namespace {

void check_prior(const UnitDataset& d, const UnitHbPrior& pr) {
  if (!(pr.a0 >= 0.0) || !(pr.g0 >= 0.0) || !(pr.g1 >= 0.0)) {
    fail(ErrorCode::ImproperPosterior, "a0, g0 and g1 must be nonnegative");
  }
  if (!(pr.a1 > 0.0)) fail(ErrorCode::ImproperPosterior, "a1 must be positive");
  Matrix Xc(d.n(), d.p());
  for (Index i = 0; i < d.m(); ++i) {
    Xc.middleRows(d.offset(i), d.n_i(i)) =
        d.X().middleRows(d.offset(i), d.n_i(i)).rowwise() - d.xbar_s().row(i);
  }
  const Index p_star = Xc.norm() > 0.0 ? numeric::numerical_rank(Xc) : 0;
  if (!(pr.g1 + static_cast<double>(d.m() - d.p() + p_star) > 0.0)) {
    fail(ErrorCode::ImproperPosterior, "posterior of lambda is not integrable at zero");
  }
  if (!(0.5 * static_cast<double>(d.n() - d.p()) + 0.5 * (pr.g0 + pr.g1) > 1.0)) {
    fail(ErrorCode::ImproperPosterior, "posterior of sigma2_e has no mean");
  }
}

Vector omega_from_lambda(const UnitDataset& d, double lambda) {
  Vector w(d.m());
  for (Index i = 0; i < d.m(); ++i) w(i) = lambda / (lambda + static_cast<double>(d.n_i(i)));
  return w;
}

// Conditional-on-lambda predictors and their variances per unit sigma2_e.
struct Conditional {
  Vector gamma, gamma_c, theta, theta_c;
  double e_sigma2_e = 0.0;
};

Conditional conditional(const UnitDataset& d, const UnitHbPrior& prior, double lambda) {
  const detail::UnitProfile pr = detail::unit_profile(d, omega_from_lambda(d, lambda));
  const double k = 0.5 * (static_cast<double>(d.n() - d.p()) + prior.g0 + prior.g1);
  Conditional c;
  c.e_sigma2_e = 0.5 * (pr.sse + prior.a0 + prior.a1 * lambda) / (k - 1.0);
  const Index m = d.m();
  c.gamma.resize(m);
  c.gamma_c.resize(m);
  c.theta.resize(m);
  c.theta_c.resize(m);
  for (Index i = 0; i < m; ++i) {
    const double w = pr.omega(i), dl = 1.0 - w;
    const double resid = d.ybar_s()(i) - d.xbar_s().row(i).dot(pr.beta);
    const double g1 = w / lambda;  // (1 - delta) sigma2_v at sigma2_e = 1
    c.theta(i) = d.Xbar().row(i).dot(pr.beta) + dl * resid;
    const Vector hx = (d.Xbar().row(i) - dl * d.xbar_s().row(i)).transpose();
    c.theta_c(i) = g1 + pr.factor->inverse_quadratic_form(hx);

    const double f = d.f()(i);
    if (f >= 1.0) {
      c.gamma(i) = d.ybar_s()(i);
      c.gamma_c(i) = 0.0;
      continue;
    }
    const double theta_u = d.xbar_u().row(i).dot(pr.beta) + dl * resid;
    c.gamma(i) = f * d.ybar_s()(i) + (1.0 - f) * theta_u;
    const Vector hu = (d.xbar_u().row(i) - dl * d.xbar_s().row(i)).transpose();
    const double nu = d.N()(i) - static_cast<double>(d.n_i(i));
    c.gamma_c(i) =
        (1.0 - f) * (1.0 - f) * (g1 + pr.factor->inverse_quadratic_form(hu) + 1.0 / nu);
  }
  return c;
}

}  // namespace

double unit_log_posterior_lambda(const UnitDataset& data, const UnitHbPrior& prior, double lambda) {
  if (!(lambda > 0.0)) return -std::numeric_limits<double>::infinity();
  if (!std::isfinite(lambda)) return -std::numeric_limits<double>::infinity();
  const Vector omega = omega_from_lambda(data, lambda);
  double log_det_sigma = 0.0;
  for (Index i = 0; i < data.m(); ++i) log_det_sigma -= std::log(omega(i));
  try {
    const detail::UnitProfile pr = detail::unit_profile(data, omega);
    const double k = 0.5 * (static_cast<double>(data.n() - data.p()) + prior.g0 + prior.g1);
    return (0.5 * prior.g1 - 1.0) * std::log(lambda) - 0.5 * log_det_sigma -
           0.5 * pr.factor->log_det() - k * std::log(pr.sse + prior.a0 + prior.a1 * lambda);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SingularDesign) return -std::numeric_limits<double>::infinity();
    throw;
  }
}

UnitHbResult unit_hb(const UnitDataset& data, const UnitHbPrior& prior, const HbOptions& opts) {
  check_prior(data, prior);
  const Index m = data.m();
  UnitHbResult out;

  auto ld = [&](double lambda) { return unit_log_posterior_lambda(data, prior, lambda); };
  if (opts.point_mass) {
    if (!(*opts.point_mass > 0.0)) fail(ErrorCode::DomainError, "lambda must be positive");
    out.lambda_posterior = detail::point_mass_posterior(*opts.point_mass, ld(*opts.point_mass));
  } else {
    auto extra = [&](double lambda, std::span<double> o) {
      std::fill(o.begin(), o.end(), 0.0);
      if (!std::isfinite(ld(lambda))) return;
      const Conditional c = conditional(data, prior, lambda);
      for (Index i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(4 * i);
        o[k] = c.gamma(i);
        o[k + 1] = c.e_sigma2_e * c.gamma_c(i);
        o[k + 2] = c.theta(i);
        o[k + 3] = c.e_sigma2_e * c.theta_c(i);
      }
    };
    // E[lambda] needs n - p + g0 > 2 for the upper tail.
    const bool mean_exists = static_cast<double>(data.n() - data.p()) + prior.g0 > 2.0;
    out.lambda_posterior = detail::build_posterior(ld, mean_exists, 1.0,
                                                   static_cast<std::size_t>(4 * m), extra, opts);
  }

  // Moments from the normalized rule, centered in a second pass.
  const HbPosterior& post = out.lambda_posterior;
  std::vector<Conditional> cs;
  cs.reserve(static_cast<std::size_t>(post.grid.size()));
  for (Index k = 0; k < post.grid.size(); ++k) {
    cs.push_back(post.weights(k) > 0.0 ? conditional(data, prior, post.grid(k)) : Conditional{});
  }
  out.gamma = Vector::Zero(m);
  out.theta = Vector::Zero(m);
  Vector eg = Vector::Zero(m), et = Vector::Zero(m);
  for (Index k = 0; k < post.grid.size(); ++k) {
    const double w = post.weights(k);
    if (!(w > 0.0)) continue;
    const Conditional& c = cs[static_cast<std::size_t>(k)];
    out.gamma += w * c.gamma;
    out.theta += w * c.theta;
    eg += (w * c.e_sigma2_e) * c.gamma_c;
    et += (w * c.e_sigma2_e) * c.theta_c;
  }
  Vector vg = Vector::Zero(m), vt = Vector::Zero(m);
  for (Index k = 0; k < post.grid.size(); ++k) {
    const double w = post.weights(k);
    if (!(w > 0.0)) continue;
    const Conditional& c = cs[static_cast<std::size_t>(k)];
    vg += w * (c.gamma - out.gamma).array().square().matrix();
    vt += w * (c.theta - out.theta).array().square().matrix();
  }
  for (Index i = 0; i < m; ++i) {
    if (data.f()(i) >= 1.0) {
      out.gamma(i) = data.ybar_s()(i);
      vg(i) = 0.0;
    }
  }
  out.gamma_variance = eg + vg;
  out.theta_variance = et + vt;
  return out;
}

}  // namespace sae
