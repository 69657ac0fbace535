#include "sae/fay_herriot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "sae/error.hpp"
#include "sae/numeric/random.hpp"
#include "sae/numeric/roots.hpp"

namespace sae {
namespace {

using numeric::SpdFactor;

SpdFactor information(const Matrix& X, const Vector& w) {
  try {
    return SpdFactor(numeric::weighted_cross_product(X, w));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotPositiveDefinite) {
      fail(ErrorCode::SingularDesign, "X^T D^{-1} X is not invertible");
    }
    throw;
  }
}

Vector weights(const AreaDataset& data, double A) {
  if (!(A >= 0.0)) fail(ErrorCode::DomainError, "variance component must be >= 0");
  return (data.V.array() + A).inverse().matrix();
}

double sample_variance(const Vector& y) {
  const double mean = y.mean();
  return (y.array() - mean).square().sum() / static_cast<double>(std::max<Index>(y.size() - 1, 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

FayHerriotFit likelihood_fit(const AreaDataset& data, VarianceMethod method,
                             const EstimateOptions& opts) {
  const bool restricted = method == VarianceMethod::REML;
  double A_max = opts.A_max.value_or(0.0);
  if (!(A_max > 0.0)) {
    const double s2 = sample_variance(data.y);
    A_max = 1e4 * (s2 > 0.0 ? s2 : data.V.mean());
  }
  int evals = 0;
  auto score = [&](double A) {
    ++evals;
    return likelihood_score(data, A, restricted);
  };

  // Scan a log grid for +/- sign changes of the score and keep the best local maximum.
  constexpr int kGrid = 80;
  const double lo = 1e-10 * A_max;
  double best_A = 0.0;
  double best_ll = log_likelihood(data, 0.0, restricted);
  bool found = false;
  double prev_x = 0.0, prev_s = score(0.0);
  for (int k = 0; k <= kGrid; ++k) {
    const double x = lo * std::pow(A_max / lo, static_cast<double>(k) / kGrid);
    const double s = score(x);
    if (prev_s > 0.0 && s <= 0.0) {
      numeric::RootOptions ro{opts.root_tol, opts.max_iter};
      const double r = numeric::brent_root(score, prev_x, x, ro);
      const double ll = log_likelihood(data, r, restricted);
      if (!found || ll > best_ll) {
        best_A = r;
        best_ll = ll;
      }
      found = true;
    }
    prev_x = x;
    prev_s = s;
  }
  if (prev_s > 0.0) {
    fail(ErrorCode::NonConvergence, "likelihood still increasing at A_max = " + std::to_string(A_max));
  }
  if (!found) best_A = 0.0;
  FayHerriotFit fit = fit_at(data, best_A, method);
  fit.iterations = evals;
  fit.at_boundary = best_A == 0.0;
  return fit;
}

FayHerriotFit fh_moment_fit(const AreaDataset& data, const EstimateOptions& opts) {
  const double target = static_cast<double>(data.m() - data.p());
  double A = pr_anova_estimate(data);
  const double v_mean = data.V.mean();
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Vector beta = gls_beta(data, A);
    auto f = [&](double a) { return fh_moment_lhs(data, a, beta) - target; };
    double next = 0.0;
    if (f(0.0) > 0.0) {
      double hi = std::max(A, v_mean);
      int doublings = 0;
      while (f(hi) > 0.0) {
        hi *= 2.0;
        if (++doublings > 200) fail(ErrorCode::NonConvergence, "FH moment: no upper bracket");
      }
      next = numeric::brent_root(f, 0.0, hi, numeric::RootOptions{opts.root_tol, opts.max_iter});
    }
    const bool done = std::fabs(next - A) < opts.rel_change * (1.0 + next);
    A = next;
    if (done) {
      FayHerriotFit fit = fit_at(data, A, VarianceMethod::FH_MOMENT);
      fit.iterations = it;
      fit.at_boundary = A == 0.0;
      return fit;
    }
  }
  fail(ErrorCode::NonConvergence,
       "FH moment: no convergence after " + std::to_string(opts.max_iter) + " alternations");
}

}  // namespace

std::string_view to_string(VarianceMethod method) noexcept {
  switch (method) {
    case VarianceMethod::FH_MOMENT: return "FH_MOMENT";
    case VarianceMethod::PR_ANOVA: return "PR_ANOVA";
    case VarianceMethod::ML: return "ML";
    case VarianceMethod::REML: return "REML";
  }
  return "?";
}

VarianceMethod parse_variance_method(std::string_view name) {
  const std::string s = lower(name);
  if (s == "fh" || s == "fh_moment" || s == "morris") return VarianceMethod::FH_MOMENT;
  if (s == "pr" || s == "pr_anova" || s == "anova") return VarianceMethod::PR_ANOVA;
  if (s == "ml") return VarianceMethod::ML;
  if (s == "reml") return VarianceMethod::REML;
  fail(ErrorCode::ValidationError, "unknown variance method '" + std::string(name) + "'");
}

Vector gls_beta(const AreaDataset& data, double A) {
  const Vector w = weights(data, A);
  return information(data.X, w).solve(Vector(data.X.transpose() * w.asDiagonal() * data.y));
}

double fh_moment_lhs(const AreaDataset& data, double A, const Vector& beta) {
  const Vector r = data.y - data.X * beta;
  return (r.array().square() / (data.V.array() + A)).sum();
}

double pr_anova_estimate(const AreaDataset& data) { return std::max(0.0, pr_anova_raw(data)); }

double pr_anova_raw(const AreaDataset& data) {
  const SpdFactor xtx = information(data.X, Vector::Ones(data.m()));
  const Vector beta = xtx.solve(Vector(data.X.transpose() * data.y));
  const Vector r = data.y - data.X * beta;
  const Vector h = hat_diagonal(data.X);
  return (r.squaredNorm() - (data.V.array() * (1.0 - h.array())).sum()) /
         static_cast<double>(data.m() - data.p());
}

double log_likelihood(const AreaDataset& data, double A, bool restricted) {
  const Vector w = weights(data, A);
  const SpdFactor info = information(data.X, w);
  const Vector beta = info.solve(Vector(data.X.transpose() * w.asDiagonal() * data.y));
  const Vector r = data.y - data.X * beta;
  double ll = 0.5 * w.array().log().sum() - 0.5 * (w.array() * r.array().square()).sum();
  if (restricted) ll -= 0.5 * info.log_det();
  return ll;
}

double likelihood_score(const AreaDataset& data, double A, bool restricted) {
  const Vector w = weights(data, A);
  const SpdFactor info = information(data.X, w);
  const Vector beta = info.solve(Vector(data.X.transpose() * w.asDiagonal() * data.y));
  const Vector r = data.y - data.X * beta;
  double trace = w.sum();
  if (restricted) {
    const Matrix W2X = w.array().square().matrix().asDiagonal() * data.X;
    trace -= info.solve(Matrix(data.X.transpose() * W2X)).trace();
  }
  return -0.5 * trace + 0.5 * (w.array().square() * r.array().square()).sum();
}

FayHerriotFit estimate_A(const AreaDataset& data, VarianceMethod method, const EstimateOptions& opts) {
  data.validate();
  switch (method) {
    case VarianceMethod::FH_MOMENT:
      return fh_moment_fit(data, opts);
    case VarianceMethod::PR_ANOVA: {
      const double A = pr_anova_estimate(data);
      FayHerriotFit fit = fit_at(data, A, method);
      fit.iterations = 1;
      fit.at_boundary = A == 0.0;
      return fit;
    }
    case VarianceMethod::ML:
    case VarianceMethod::REML:
      return likelihood_fit(data, method, opts);
  }
  fail(ErrorCode::InvalidArgument, "unknown variance method");
}

FayHerriotFit fit_at(const AreaDataset& data, double A, VarianceMethod method) {
  FayHerriotFit fit;
  fit.A_hat = A;
  fit.method = method;
  fit.beta_hat = gls_beta(data, A);
  fit.B_hat = (data.V.array() / (data.V.array() + A)).matrix();
  fit.at_boundary = A == 0.0;
  fit.theta_hat = eblup(data, fit);
  return fit;
}

Vector eblup(const AreaDataset& data, const FayHerriotFit& fit) {
  const Vector synth = data.X * fit.beta_hat;
  return ((1.0 - fit.B_hat.array()) * data.y.array() + fit.B_hat.array() * synth.array()).matrix();
}

BalancedFit balanced_fit(const AreaDataset& data) {
  if (data.m() <= data.p() + 2) {
    fail(ErrorCode::TooFewAreas, "balanced shrinkage needs m > p + 2");
  }
  if (!data.balanced(1e-10)) fail(ErrorCode::ValidationError, "balanced shrinkage needs equal V_i");
  BalancedFit b;
  b.V_common = data.V(0);
  const SpdFactor xtx = information(data.X, Vector::Ones(data.m()));
  b.beta_ols = xtx.solve(Vector(data.X.transpose() * data.y));
  b.fitted = data.X * b.beta_ols;
  b.h_diag = hat_diagonal(data.X);
  b.S = (data.y - b.fitted).squaredNorm();
  const double scale = data.y.squaredNorm();
  b.degenerate = !(b.S > 1e-28 * std::max(scale, 1.0));
  if (b.degenerate) {
    b.S = 0.0;
    b.B_hat_eb = std::numeric_limits<double>::infinity();
    b.B_hat_plus = 1.0;
  } else {
    b.B_hat_eb = b.V_common * static_cast<double>(data.m() - data.p() - 2) / b.S;
    b.B_hat_plus = std::min(b.B_hat_eb, 1.0);
  }
  return b;
}

JamesSteinResult james_stein_balanced(const AreaDataset& data, bool positive_part) {
  JamesSteinResult out{balanced_fit(data), {}};
  if (out.fit.degenerate) {
    out.estimate = out.fit.fitted;
    return out;
  }
  const double B = positive_part ? out.fit.B_hat_plus : out.fit.B_hat_eb;
  out.estimate = (1.0 - B) * data.y + B * out.fit.fitted;
  return out;
}

BayesRisk theorem3_risk(const AreaDataset& data, double B) {
  if (data.m() <= data.p() + 2) fail(ErrorCode::TooFewAreas, "risk needs m > p + 2");
  if (!data.balanced(1e-10)) fail(ErrorCode::ValidationError, "risk needs equal V_i");
  const double V = data.V(0);
  const double mp = static_cast<double>(data.m() - data.p());
  const Vector h = hat_diagonal(data.X);
  BayesRisk r;
  r.per_area = (V * (1.0 - B) + V * B * h.array() + 2.0 * V * B * (1.0 - h.array()) / mp).matrix();
  r.total = V * (static_cast<double>(data.m()) - (mp - 2.0) * B);
  return r;
}

MonteCarloRisk james_stein_mc_risk(const Matrix& X, double V, double B, const Vector& beta,
                                   long reps, std::uint64_t seed, bool positive_part) {
  if (!(B > 0.0 && B < 1.0)) fail(ErrorCode::DomainError, "B must lie in (0, 1)");
  const Index m = X.rows(), p = X.cols();
  if (m <= p + 2) fail(ErrorCode::TooFewAreas, "risk needs m > p + 2");
  const double A = V * (1.0 - B) / B;
  const Matrix H = X * SpdFactor(numeric::cross_product(X)).solve(Matrix(X.transpose()));
  const Vector mean = X * beta;
  Vector sum = Vector::Zero(m), sum2 = Vector::Zero(m);
  double tsum = 0.0, tsum2 = 0.0;
  Vector theta(m), y(m);
  for (long r = 0; r < reps; ++r) {
    auto rng = numeric::RandomStream::substream(seed, static_cast<std::uint64_t>(r));
    for (Index i = 0; i < m; ++i) {
      theta(i) = mean(i) + std::sqrt(A) * rng.normal();
      y(i) = theta(i) + std::sqrt(V) * rng.normal();
    }
    const Vector fitted = H * y;
    const double S = (y - fitted).squaredNorm();
    double Bh = V * static_cast<double>(m - p - 2) / S;
    if (positive_part) Bh = std::min(Bh, 1.0);
    const Vector err = ((1.0 - Bh) * y + Bh * fitted - theta).array().square().matrix();
    sum += err;
    sum2 += err.array().square().matrix();
    const double t = err.sum();
    tsum += t;
    tsum2 += t * t;
  }
  const double n = static_cast<double>(reps);
  MonteCarloRisk out;
  out.reps = reps;
  out.mean = sum / n;
  out.se = ((sum2 / n - out.mean.array().square().matrix()).array().max(0.0) / n).sqrt().matrix();
  out.total_mean = tsum / n;
  out.total_se = std::sqrt(std::max(0.0, tsum2 / n - out.total_mean * out.total_mean) / n);
  return out;
}

Vector general_v_gls_beta(const GeneralVModel& model, double A) {
  if (!(A >= 0.0)) fail(ErrorCode::DomainError, "variance component must be >= 0");
  SymmetricMatrix D = model.V;
  D.add_to_diagonal(A);
  const SpdFactor Df(D);
  const Matrix DinvX = Df.solve(model.X);
  SpdFactor info = [&] {
    try {
      return SpdFactor(SymmetricMatrix::from_dense(model.X.transpose() * DinvX));
    } catch (const Error&) {
      fail(ErrorCode::SingularDesign, "X^T D^{-1} X is not invertible");
    }
  }();
  return info.solve(Vector(DinvX.transpose() * model.y));
}

Vector general_v_blup(const GeneralVModel& model, double A) {
  SymmetricMatrix D = model.V;
  D.add_to_diagonal(A);
  const SpdFactor Df(D);
  const Vector beta = general_v_gls_beta(model, A);
  const Vector r = model.y - model.X * beta;
  return model.y - Df.solve(Vector(model.V.dense() * r));
}

Vector balanced_loss_estimate(const AreaDataset& data, double w, std::optional<double> B) {
  if (!(w >= 0.0 && w <= 1.0)) fail(ErrorCode::DomainError, "balanced-loss weight outside [0, 1]");
  Vector fitted;
  double b;
  if (B) {
    const SpdFactor xtx = information(data.X, Vector::Ones(data.m()));
    fitted = data.X * xtx.solve(Vector(data.X.transpose() * data.y));
    b = *B;
  } else {
    const BalancedFit f = balanced_fit(data);
    fitted = f.fitted;
    b = f.B_hat_plus;
  }
  const double s = (1.0 - w) * b;
  return (1.0 - s) * data.y + s * fitted;
}

BalancedLossRisk balanced_loss_mc_risk(const Matrix& X, double V, double B, double w,
                                       bool empirical, long reps, std::uint64_t seed) {
  if (!(B > 0.0 && B < 1.0)) fail(ErrorCode::DomainError, "B must lie in (0, 1)");
  const Index m = X.rows();
  const double A = V * (1.0 - B) / B;
  AreaDataset d{{}, Vector(m), X, Vector::Constant(m, V)};
  Vector theta(m);
  double ps = 0, ps2 = 0, ls = 0, ls2 = 0;
  for (long r = 0; r < reps; ++r) {
    auto rng = numeric::RandomStream::substream(seed, static_cast<std::uint64_t>(r));
    for (Index i = 0; i < m; ++i) {
      theta(i) = std::sqrt(A) * rng.normal();
      d.y(i) = theta(i) + std::sqrt(V) * rng.normal();
    }
    const Vector T = empirical ? balanced_loss_estimate(d, w) : balanced_loss_estimate(d, w, B);
    const double prec = (T - theta).squaredNorm() / static_cast<double>(m);
    const double loss = w * (d.y - T).squaredNorm() / static_cast<double>(m) + (1.0 - w) * prec;
    ps += prec; ps2 += prec * prec;
    ls += loss; ls2 += loss * loss;
  }
  const double n = static_cast<double>(reps);
  BalancedLossRisk out;
  out.precision = ps / n;
  out.precision_se = std::sqrt(std::max(0.0, ps2 / n - out.precision * out.precision) / n);
  out.loss = ls / n;
  out.loss_se = std::sqrt(std::max(0.0, ls2 / n - out.loss * out.loss) / n);
  return out;
}

}  // namespace sae
