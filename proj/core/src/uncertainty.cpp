#include "sae/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "sae/error.hpp"
#include "sae/numeric/random.hpp"

namespace sae {
namespace {

using numeric::SpdFactor;

// x_i^T [sum_j x_j x_j^T / (V_j + A)]^{-1} x_i
Vector leverage(const Matrix& X, const Vector& V, double A) {
  const Vector w = (V.array() + A).inverse().matrix();
  SpdFactor info = [&] {
    try {
      return SpdFactor(numeric::weighted_cross_product(X, w));
    } catch (const Error&) {
      fail(ErrorCode::SingularDesign, "X^T D^{-1} X is not invertible");
    }
  }();
  const Matrix sol = info.solve(Matrix(X.transpose()));
  return (X.array() * sol.transpose().array()).rowwise().sum();
}

double sum_pow(const Vector& V, double A, double k) {
  return (V.array() + A).pow(k).sum();
}

MseDecomposition plugin(const AreaDataset& data, const FayHerriotFit& fit, bool second_order) {
  const double A = fit.A_hat;
  MseDecomposition d = g_terms(data, A, var_A_hat(data, A, fit.method));
  const Vector B = (data.V.array() / (data.V.array() + A)).matrix();
  d.boundary_warning = A == 0.0;
  if (second_order) {
    d.kind = MseKind::SECOND_ORDER;
    d.bias_term = (B.array().square() * bias_A_hat(data, A, fit.method)).matrix();
    d.total = d.g1 + d.g2 + 2.0 * d.g3 - d.bias_term;
  } else {
    d.kind = MseKind::NAIVE_PLUGIN;
  }
  return d;
}

}  // namespace

Vector MseDecomposition::corrected_g1() const {
  return g1 + g3 - (bias_term.size() == g1.size() ? bias_term : Vector::Zero(g1.size()));
}

MseDecomposition g_terms(const AreaDataset& data, double A, double var_A) {
  if (!(A >= 0.0)) fail(ErrorCode::DomainError, "g_terms: A must be >= 0");
  if (!(var_A >= 0.0)) fail(ErrorCode::DomainError, "g_terms: Var(A) must be >= 0");
  const auto V = data.V.array();
  const Vector lev = leverage(data.X, data.V, A);
  MseDecomposition d;
  d.kind = MseKind::TRUE_APPROX;
  // B = V / (V + A); with V = 0 and A = 0 the limit B -> 1 is taken on g2 only.
  Eigen::ArrayXd B = V / (V + A);
  d.g1 = (V * (1.0 - B)).matrix();
  d.g1 = d.g1.cwiseMax(0.0);
  d.g2 = (B.square() * lev.array()).matrix();
  d.g3 = (V.square() / (V + A).cube() * var_A).matrix();
  for (Index i = 0; i < data.m(); ++i) {
    if (data.V(i) == 0.0) {
      d.g1(i) = d.g2(i) = d.g3(i) = 0.0;
    }
  }
  d.bias_term = Vector::Zero(data.m());
  d.total = d.g1 + d.g2 + d.g3;
  return d;
}

double var_A_hat(const AreaDataset& data, double A, VarianceMethod method) {
  const double m = static_cast<double>(data.m());
  switch (method) {
    case VarianceMethod::REML:
    case VarianceMethod::ML:
      return 2.0 / sum_pow(data.V, A, -2.0);
    case VarianceMethod::FH_MOMENT: {
      const double s1 = sum_pow(data.V, A, -1.0);
      return 2.0 * m / (s1 * s1);
    }
    case VarianceMethod::PR_ANOVA:
      return 2.0 * sum_pow(data.V, A, 2.0) / (m * m);
  }
  return 0.0;
}

double bias_A_hat(const AreaDataset& data, double A, VarianceMethod method) {
  switch (method) {
    case VarianceMethod::PR_ANOVA:
    case VarianceMethod::REML:
      return 0.0;
    case VarianceMethod::ML: {
      const Vector w = (data.V.array() + A).inverse().matrix();
      const Vector lev = leverage(data.X, data.V, A);
      return -(lev.array() * w.array().square()).sum() / w.array().square().sum();
    }
    case VarianceMethod::FH_MOMENT: {
      const double m = static_cast<double>(data.m());
      const double s1 = sum_pow(data.V, A, -1.0);
      const double s2 = sum_pow(data.V, A, -2.0);
      return 2.0 * (m * s2 - s1 * s1) / (s1 * s1 * s1);
    }
  }
  return 0.0;
}

MseDecomposition mse_second_order(const AreaDataset& data, const FayHerriotFit& fit) {
  return plugin(data, fit, true);
}

MseDecomposition mse_naive(const AreaDataset& data, const FayHerriotFit& fit) {
  return plugin(data, fit, false);
}

MorrisFit morris_measure(const AreaDataset& data, double A_hat, const Vector& beta_hat,
                         MorrisVbar vbar) {
  const Index m = data.m(), p = data.p();
  if (m <= p + 2) fail(ErrorCode::TooFewAreas, "Morris measure needs m > p + 2");
  if (!(A_hat >= 0.0)) fail(ErrorCode::DomainError, "Morris measure: A must be >= 0");
  const auto V = data.V.array();
  const Eigen::ArrayXd D = V + A_hat;
  const double shrink = static_cast<double>(m - p - 2) / static_cast<double>(m - p);
  MorrisFit f;
  f.B_hat_M = (shrink * V / D).matrix();
  const Vector synth = data.X * beta_hat;
  const Eigen::ArrayXd resid = data.y.array() - synth.array();
  f.theta_M = ((1.0 - f.B_hat_M.array()) * data.y.array() + f.B_hat_M.array() * synth.array()).matrix();
  f.t_hat = (leverage(data.X, data.V, A_hat).array() / D).matrix();
  if (vbar == MorrisVbar::Arithmetic) {
    f.V_bar = data.V.mean();
  } else {
    f.V_bar = (V / D).sum() / D.inverse().sum();
  }
  const auto BM = f.B_hat_M.array();
  f.g1 = (V * (1.0 - BM)).matrix();
  f.g2 = (V * BM * f.t_hat.array()).matrix();
  f.g3 = (2.0 * BM.square() * resid.square() / static_cast<double>(m - p - 2) *
          (f.V_bar + A_hat) / D).matrix();
  f.s2 = f.g1 + f.g2 + f.g3;
  return f;
}

SymmetricMatrix general_v_K(const GeneralVModel& model, double A) {
  if (!(A >= 0.0)) fail(ErrorCode::DomainError, "general-V: A must be >= 0");
  SymmetricMatrix D = model.V;
  D.add_to_diagonal(A);
  const SpdFactor Df(D);
  const Matrix Dinv = Df.inverse().dense();
  const Matrix DinvX = Dinv * model.X;
  const SpdFactor info(SymmetricMatrix::from_dense(model.X.transpose() * DinvX));
  return SymmetricMatrix::from_dense(Dinv - DinvX * info.solve(Matrix(DinvX.transpose())));
}

SymmetricMatrix general_v_plugin_mse(const GeneralVModel& model, double A) {
  if (!(A >= 0.0)) fail(ErrorCode::DomainError, "general-V: A must be >= 0");
  const Index m = model.m();
  SymmetricMatrix D = model.V;
  D.add_to_diagonal(A);
  const SpdFactor Df(D);
  const Matrix& V = model.V.dense();
  const Matrix B = Df.solve(V);  // (V + A I)^{-1} V
  const Matrix DinvX = Df.solve(model.X);
  const SpdFactor info(SymmetricMatrix::from_dense(model.X.transpose() * DinvX));
  const Matrix BX = B * model.X;
  const Matrix term1 = V * (Matrix::Identity(m, m) - B);
  const Matrix term2 = BX * info.solve(Matrix(BX.transpose()));
  const Matrix K = general_v_K(model, A).dense();
  const Matrix Vinv = numeric::SpdFactor(model.V).inverse().dense();
  const double trace_vinv2 = (Vinv * Vinv).trace();
  const Matrix term3 = 2.0 * V * K * K * K * V / trace_vinv2;
  return SymmetricMatrix::from_dense(term1 + term2 + term3);
}

MseMonteCarlo mse_monte_carlo(const Matrix& X, const Vector& V, double A, const Vector& beta,
                              VarianceMethod method, long reps, std::uint64_t seed) {
  const Index m = X.rows();
  AreaDataset d{{}, Vector(m), X, V};
  d.validate();
  const Vector mean = X * beta;
  Vector theta(m);
  Vector se_sum = Vector::Zero(m), se_sum2 = Vector::Zero(m);
  Vector s_sum = Vector::Zero(m), i_sum = Vector::Zero(m), g3_sum = Vector::Zero(m);
  double a_sum = 0, a_sum2 = 0, r_sum = 0, r_sum2 = 0;
  for (long r = 0; r < reps; ++r) {
    auto rng = numeric::RandomStream::substream(seed, static_cast<std::uint64_t>(r));
    for (Index i = 0; i < m; ++i) {
      theta(i) = mean(i) + std::sqrt(A) * rng.normal();
      d.y(i) = theta(i) + std::sqrt(V(i)) * rng.normal();
    }
    const FayHerriotFit fit = estimate_A(d, method);
    const Vector err = (fit.theta_hat - theta).array().square().matrix();
    se_sum += err;
    se_sum2 += err.array().square().matrix();
    const MseDecomposition s = mse_second_order(d, fit);
    s_sum += s.total;
    i_sum += s.g1 + s.g2 + s.g3;
    g3_sum += s.g3;
    a_sum += fit.A_hat;
    a_sum2 += fit.A_hat * fit.A_hat;
    const double raw = method == VarianceMethod::PR_ANOVA ? pr_anova_raw(d) : fit.A_hat;
    r_sum += raw;
    r_sum2 += raw * raw;
  }
  const double n = static_cast<double>(reps);
  MseMonteCarlo out;
  out.reps = reps;
  out.empirical_mse = se_sum / n;
  out.empirical_se =
      ((se_sum2 / n - out.empirical_mse.array().square().matrix()).array().max(0.0) / n).sqrt().matrix();
  out.mean_mse_s = s_sum / n;
  out.mean_mse_i = i_sum / n;
  out.mean_g3 = g3_sum / n;
  out.mean_A = a_sum / n;
  out.var_A = (a_sum2 - n * out.mean_A * out.mean_A) / (n - 1.0);
  out.mean_A_raw = r_sum / n;
  out.var_A_raw = (r_sum2 - n * out.mean_A_raw * out.mean_A_raw) / (n - 1.0);
  return out;
}

}  // namespace sae
