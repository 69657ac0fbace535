#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sae/error.hpp"
#include "sae/unit_level.hpp"

using namespace sae;

namespace {

UnitDataset to_dataset(const oracle::UnitPopulation& pop) {
  std::vector<Index> n(pop.n.begin(), pop.n.end());
  Vector N(static_cast<Index>(pop.N.size()));
  for (std::size_t i = 0; i < pop.N.size(); ++i) N(static_cast<Index>(i)) = pop.N[i];
  return UnitDataset::from_grouped(n, pop.ys, pop.Xs, N, pop.Xbar);
}

VarianceComponents components(double s2v, double s2e) {
  VarianceComponents c;
  c.sigma2_v = s2v;
  c.sigma2_e = s2e;
  return c;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

// Balanced population with census sizes N_i = n_i and a simulated response.
UnitDataset simulate(int m, int ni, int p, double s2v, double s2e, std::mt19937_64& rng,
                     const Matrix* fixed_X = nullptr) {
  std::normal_distribution<double> z;
  Matrix X(m * ni, p);
  Vector y(m * ni);
  for (int i = 0; i < m; ++i) {
    const double v = std::sqrt(s2v) * z(rng);
    for (int j = 0; j < ni; ++j) {
      const int r = i * ni + j;
      if (fixed_X) {
        X.row(r) = fixed_X->row(r);
      } else {
        X(r, 0) = 1.0;
        for (int a = 1; a < p; ++a) X(r, a) = 0.5 * i / m + z(rng);
      }
      y(r) = 1.0 + (p > 1 ? 0.7 * X(r, 1) : 0.0) + v + std::sqrt(s2e) * z(rng);
    }
  }
  Matrix Xbar(m, p);
  for (int i = 0; i < m; ++i) Xbar.row(i) = X.middleRows(i * ni, ni).colwise().mean();
  return UnitDataset::from_grouped(std::vector<Index>(m, ni), y, X, Vector::Constant(m, 2.0 * ni), Xbar);
}

}  // namespace

TEST(UnitGls, BlockMatchesDense) {
  std::mt19937_64 rng(51);
  for (int rep = 0; rep < 200; ++rep) {
    const int m = 2 + rep % 6, p = 1 + rep % 3;
    const oracle::UnitPopulation pop = oracle::random_population(m, p, 6, 3, rng);
    if (pop.ys.size() > 50) continue;
    const UnitDataset d = to_dataset(pop);
    const double s2v = 0.2 + 0.1 * (rep % 7), s2e = 0.5 + 0.05 * (rep % 5);
    const Vector beta = unit_gls(d, components(s2v, s2e));
    const oracle::Vec ref = oracle::dense_gls(pop.Xs, oracle::unit_sigma(pop.n, s2v, s2e), pop.ys);
    ASSERT_LE((beta - ref).norm(), 1e-10 * (1.0 + ref.norm())) << rep;
    const oracle::Mat info = pop.Xs.transpose() * oracle::inverse(oracle::unit_sigma(pop.n, s2v, s2e)) * pop.Xs;
    ASSERT_LE((unit_information(d, components(s2v, s2e)).dense() - info).norm(), 1e-10 * info.norm());
  }
}

TEST(UnitGls, NoAreaEffectIsOls) {
  std::mt19937_64 rng(52);
  const oracle::UnitPopulation pop = oracle::random_population(5, 2, 4, 2, rng);
  const UnitDataset d = to_dataset(pop);
  const Vector beta = unit_gls(d, components(0.0, 1.3));
  const oracle::Vec ols = oracle::solve(pop.Xs.transpose() * pop.Xs, pop.Xs.transpose() * pop.ys);
  EXPECT_LE((beta - ols).norm(), 1e-12 * (1.0 + ols.norm()));
}

TEST(UnitData, SingleUnitPerAreaRejected) {
  // n = m leaves no room for both components.
  const int m = 9;
  const Matrix X = Matrix::Ones(m, 1);
  const Vector y = Vector::LinSpaced(m, 0.0, 1.0);
  EXPECT_EQ(code_of([&] {
              UnitDataset::from_grouped(std::vector<Index>(m, 1), y, X, Vector::Constant(m, 3.0), Matrix::Ones(m, 1));
            }),
            ErrorCode::ValidationError);
}

TEST(UnitBlup, MatchesConditionalNormal) {
  std::mt19937_64 rng(54);
  oracle::UnitPopulation pop = oracle::random_population(3, 1, 2, 0, rng);
  // Fix the shape m = 3, n_i = 2, N_i = 4 with distinct unsampled rows.
  pop = oracle::UnitPopulation{};
  std::normal_distribution<double> z;
  pop.n = {2, 2, 2};
  pop.N = {4, 4, 4};
  pop.Xs.resize(6, 2);
  pop.ys.resize(6);
  pop.Xbar = oracle::Mat::Zero(3, 2);
  for (int i = 0; i < 3; ++i) {
    pop.Xu.emplace_back(2, 2);
    for (int j = 0; j < 4; ++j) {
      const double x = z(rng);
      if (j < 2) {
        pop.Xs.row(2 * i + j) << 1.0, x;
        pop.ys(2 * i + j) = 0.5 + x + z(rng);
      } else {
        pop.Xu[i].row(j - 2) << 1.0, x;
      }
      pop.Xbar(i, 0) += 0.25;
      pop.Xbar(i, 1) += 0.25 * x;
    }
  }
  const UnitDataset d = to_dataset(pop);
  for (double s2v : {0.1, 1.0, 5.0}) {
    const UnitFit fit = unit_blup(d, components(s2v, 0.9));
    const oracle::Vec g = oracle::unit_gamma_dense(pop, s2v, 0.9);
    const oracle::Vec t = oracle::unit_theta_dense(pop, s2v, 0.9);
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(fit.gamma(i), g(i), 1e-9 * (1.0 + std::abs(g(i))));
      EXPECT_NEAR(fit.theta(i), t(i), 1e-9 * (1.0 + std::abs(t(i))));
    }
  }
}

TEST(UnitBlup, RandomConditionalNormal) {
  std::mt19937_64 rng(55);
  for (int rep = 0; rep < 50; ++rep) {
    const oracle::UnitPopulation pop = oracle::random_population(4, 2, 4, 4, rng);
    const UnitDataset d = to_dataset(pop);
    const UnitFit fit = unit_blup(d, components(0.7, 1.1));
    const oracle::Vec g = oracle::unit_gamma_dense(pop, 0.7, 1.1);
    ASSERT_LE((fit.gamma - g).norm(), 1e-9 * (1.0 + g.norm())) << rep;
  }
}

TEST(UnitBlup, CensusAndSyntheticLimits) {
  std::mt19937_64 rng(56);
  oracle::UnitPopulation pop = oracle::random_population(4, 2, 4, 0, rng);
  const UnitDataset d = to_dataset(pop);
  const UnitFit fit = unit_blup(d, components(0.5, 1.0));
  for (Index i = 0; i < d.m(); ++i) EXPECT_EQ(fit.gamma(i), d.ybar_s()(i));
  const UnitFit syn = unit_blup(d, components(0.0, 1.0));
  for (Index i = 0; i < d.m(); ++i) {
    EXPECT_EQ(syn.delta(i), 0.0);
    EXPECT_NEAR(syn.theta(i), d.Xbar().row(i).dot(syn.beta), 1e-12);
  }
}

TEST(UnitBlup, DeltaAndConvexity) {
  std::mt19937_64 rng(57);
  const oracle::UnitPopulation pop = oracle::random_population(6, 2, 5, 6, rng);
  const UnitDataset d = to_dataset(pop);
  const UnitFit fit = unit_blup(d, components(0.4, 1.2));
  for (Index i = 0; i < d.m(); ++i) {
    const double ni = static_cast<double>(d.n_i(i));
    EXPECT_NEAR(fit.delta(i), 0.4 / (0.4 + 1.2 / ni), 1e-14);
    const double f = d.f()(i);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
    EXPECT_NEAR(fit.gamma(i), f * d.ybar_s()(i) + (1.0 - f) * fit.theta_u(i), 1e-12);
  }
}

TEST(UnitData, UnsampledMeanConsistent) {
  std::mt19937_64 rng(58);
  const oracle::UnitPopulation pop = oracle::random_population(5, 3, 4, 5, rng);
  const UnitDataset d = to_dataset(pop);
  for (Index i = 0; i < d.m(); ++i) {
    const double f = d.f()(i);
    const Vector lhs = d.Xbar().row(i).transpose();
    const Vector rhs = (f * d.xbar_s().row(i) + (1.0 - f) * d.xbar_u().row(i)).transpose();
    EXPECT_LE((lhs - rhs).norm(), 1e-12);
  }
}

TEST(Anova, ConstantData) {
  const int m = 4, ni = 3;
  Matrix X = Matrix::Ones(m * ni, 1);
  const UnitDataset d = UnitDataset::from_grouped(std::vector<Index>(m, ni), Vector::Constant(m * ni, 7.0), X,
                                                  Vector::Constant(m, 10.0), Matrix::Ones(m, 1));
  const VarianceComponents c = anova_components(d);
  EXPECT_NEAR(c.sigma2_e, 0.0, 1e-20);
  EXPECT_NEAR(c.sigma2_v, 0.0, 1e-20);
}

TEST(Anova, AreaConstantCovariates) {
  std::mt19937_64 rng(59);
  std::normal_distribution<double> z;
  const int m = 6, ni = 4;
  Matrix X(m * ni, 2);
  Vector y(m * ni);
  for (int i = 0; i < m; ++i) {
    const double xi = z(rng);
    for (int j = 0; j < ni; ++j) {
      X.row(i * ni + j) << 1.0, xi;
      y(i * ni + j) = xi + z(rng);
    }
  }
  Matrix Xbar(m, 2);
  for (int i = 0; i < m; ++i) Xbar.row(i) = X.row(i * ni);
  const UnitDataset d = UnitDataset::from_grouped(std::vector<Index>(m, ni), y, X, Vector::Constant(m, 8.0), Xbar);
  const VarianceComponents c = anova_components(d);
  EXPECT_EQ(c.p_star, 0);
  double within = 0.0;
  for (int i = 0; i < m; ++i) {
    const double mean = y.segment(i * ni, ni).mean();
    within += (y.segment(i * ni, ni).array() - mean).square().sum();
  }
  EXPECT_NEAR(c.sigma2_e, within / (m * ni - m), 1e-12);
}

TEST(Anova, UnbiasedBeforeTruncation) {
  std::mt19937_64 rng(60);
  const int m = 40, ni = 5, reps = 2000;
  const UnitDataset base = simulate(m, ni, 2, 1.0, 2.0, rng);
  double sv = 0, sv2 = 0, se = 0, se2 = 0;
  for (int r = 0; r < reps; ++r) {
    const UnitDataset d = simulate(m, ni, 2, 1.0, 2.0, rng, &base.X());
    const VarianceComponents c = anova_components(d);
    sv += c.sigma2_v_raw;
    sv2 += c.sigma2_v_raw * c.sigma2_v_raw;
    se += c.sigma2_e;
    se2 += c.sigma2_e * c.sigma2_e;
  }
  const double mv = sv / reps, me = se / reps;
  const double sev = std::sqrt((sv2 / reps - mv * mv) / reps), see = std::sqrt((se2 / reps - me * me) / reps);
  EXPECT_NEAR(mv, 1.0, 3.0 * sev);
  EXPECT_NEAR(me, 2.0, 3.0 * see);
}

TEST(Likelihood, RemlNearAnovaAndNonnegative) {
  std::mt19937_64 rng(61);
  const UnitDataset d = simulate(30, 6, 2, 1.0, 1.5, rng);
  const VarianceComponents a = anova_components(d);
  const VarianceComponents r = likelihood_components(d, true);
  const VarianceComponents ml = likelihood_components(d, false);
  EXPECT_GE(r.sigma2_v, 0.0);
  EXPECT_GE(ml.sigma2_v, 0.0);
  EXPECT_NEAR(r.sigma2_e, a.sigma2_e, 0.2 * a.sigma2_e);
  EXPECT_NEAR(r.sigma2_v, a.sigma2_v, 0.5 * a.sigma2_v + 0.1);
  EXPECT_LE(ml.sigma2_v, r.sigma2_v + 1e-9);
}

TEST(UnitMse, NoAreaEffect) {
  std::mt19937_64 rng(62);
  const UnitDataset d = simulate(10, 4, 2, 1.0, 1.0, rng);
  VarianceComponents c = components(0.0, 1.0);
  c.method = UnitMethod::ANOVA;
  const UnitFit f = unit_blup(d, c);
  for (Index i = 0; i < d.m(); ++i) EXPECT_EQ(f.delta(i), 0.0);
  const MseDecomposition g = unit_mse(d, c);
  for (Index i = 0; i < d.m(); ++i) EXPECT_EQ(g.g1(i), 0.0);
  EXPECT_TRUE(g.boundary_warning);
}

TEST(UnitMse, LargeSampleLimits) {
  std::vector<double> g1s, g3s;
  for (int ni : {100, 10000, 1000000}) {
    const int m = 8;
    Matrix X = Matrix::Ones(m * ni, 1);
    Vector y(m * ni);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < ni; ++j) y(i * ni + j) = 0.3 * i + ((j % 2) ? 1.0 : -1.0);
    const UnitDataset d = UnitDataset::from_grouped(std::vector<Index>(m, ni), y, X, Vector::Constant(m, 2.0 * ni),
                                                    Matrix::Ones(m, 1));
    VarianceComponents c = components(0.5, 1.0);
    c.method = UnitMethod::ANOVA;
    const MseDecomposition g = unit_mse(d, c);
    g1s.push_back(g.g1(0));
    g3s.push_back(g.g3(0));
  }
  // g1 ~ sigma2_e / n_i, g3 ~ n_i^{-2}
  EXPECT_NEAR(g1s[2] * 1e6, 1.0, 1e-5);
  EXPECT_LT(g1s[1] / g1s[0], 0.02);
  EXPECT_LT(g3s[1] / g3s[0], 1e-3);
  EXPECT_LT(g3s[2], 1e-10);
}

TEST(UnitHb, PointMassReducesToBlup) {
  std::mt19937_64 rng(63);
  const oracle::UnitPopulation pop = oracle::random_population(5, 2, 5, 4, rng);
  const UnitDataset d = to_dataset(pop);
  UnitHbPrior prior;
  prior.a0 = 0.5;
  prior.g0 = 0.5;
  prior.a1 = 0.5;
  prior.g1 = 0.5;
  HbOptions opts;
  const double lambda = 2.5;
  opts.point_mass = lambda;
  const UnitHbResult hb = unit_hb(d, prior, opts);
  const UnitFit fit = unit_blup(d, components(1.0 / lambda, 1.0));
  for (Index i = 0; i < d.m(); ++i) {
    EXPECT_NEAR(hb.gamma(i), fit.gamma(i), 1e-8 * (1.0 + std::abs(fit.gamma(i))));
    EXPECT_NEAR(hb.theta(i), fit.theta(i), 1e-8 * (1.0 + std::abs(fit.theta(i))));
  }
}

TEST(UnitHb, DenseGridOverLambdaAndR) {
  std::mt19937_64 rng(64);
  oracle::UnitPopulation pop = oracle::random_population(3, 1, 2, 3, rng);
  pop.n = {2, 2, 2};
  // Rebuild a tiny population with n_i = 2 exactly.
  {
    std::normal_distribution<double> z;
    pop.Xs = oracle::Mat::Ones(6, 1);
    pop.ys.resize(6);
    pop.N = {5, 3, 6};
    pop.Xu.clear();
    for (int i = 0; i < 3; ++i) {
      const double v = z(rng);
      for (int j = 0; j < 2; ++j) pop.ys(2 * i + j) = 1.0 + v + 0.8 * z(rng);
      pop.Xu.push_back(oracle::Mat::Ones(pop.N[i] - 2, 1));
    }
    pop.Xbar = oracle::Mat::Ones(3, 1);
  }
  const UnitDataset d = to_dataset(pop);
  UnitHbPrior prior;
  prior.a0 = 1.0;
  prior.g0 = 2.0;
  prior.a1 = 1.0;
  prior.g1 = 2.0;
  const UnitHbResult hb = unit_hb(d, prior);

  // sigma2_e ~ IG(a0/2, g0/2), sigma2_v ~ IG(a1/2, g1/2) in the shape-last convention
  // exp(-b/x) x^{-a-1}; substitute sigma2_e = 1/r, sigma2_v = 1/(r lambda).
  const int K = 360;
  const double lo_l = std::log(1e-4), hi_l = std::log(1e5), lo_r = std::log(1e-4), hi_r = std::log(1e4);
  std::vector<double> lw;
  std::vector<oracle::Vec> gs;
  double mx = -1e300;
  for (int a = 0; a < K; ++a) {
    const double ll = lo_l + (a + 0.5) * (hi_l - lo_l) / K;
    for (int b = 0; b < K; ++b) {
      const double lr = lo_r + (b + 0.5) * (hi_r - lo_r) / K;
      const double lambda = std::exp(ll), r = std::exp(lr);
      const double s2e = 1.0 / r, s2v = 1.0 / (r * lambda);
      const oracle::Mat S = oracle::unit_sigma(pop.n, s2v, s2e);
      const oracle::Mat Si = oracle::inverse(S);
      const oracle::Mat info = pop.Xs.transpose() * Si * pop.Xs;
      const oracle::Vec beta = oracle::solve(info, pop.Xs.transpose() * Si * pop.ys);
      const oracle::Vec res = pop.ys - pop.Xs * beta;
      double l = -0.5 * oracle::log_abs_det(S) - 0.5 * oracle::log_abs_det(info) - 0.5 * res.dot(Si * res);
      l += -0.5 * prior.a0 / s2e - (0.5 * prior.g0 + 1.0) * std::log(s2e);
      l += -0.5 * prior.a1 / s2v - (0.5 * prior.g1 + 1.0) * std::log(s2v);
      l += -3.0 * lr - 2.0 * ll;  // Jacobian 1 / (r^3 lambda^2)
      l += ll + lr;               // log-scale grid
      lw.push_back(l);
      gs.push_back(oracle::unit_gamma_dense(pop, s2v, s2e));
      mx = std::max(mx, l);
    }
  }
  double z = 0.0;
  oracle::Vec eg = oracle::Vec::Zero(3);
  for (std::size_t k = 0; k < lw.size(); ++k) {
    const double w = std::exp(lw[k] - mx);
    z += w;
    eg += w * gs[k];
  }
  eg /= z;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(hb.gamma(i), eg(i), 1e-3 * std::abs(eg(i))) << i;
}

TEST(UnitHb, DiffusePriorNearEblup) {
  std::mt19937_64 rng(65);
  const UnitDataset d = simulate(12, 60, 2, 1.0, 1.0, rng);
  UnitHbPrior prior;
  prior.a0 = 0.001;
  prior.g0 = 0.001;
  prior.a1 = 0.001;
  prior.g1 = 0.001;
  const UnitHbResult hb = unit_hb(d, prior);
  const UnitFit fit = unit_blup(d, estimate_components(d, UnitMethod::REML));
  for (Index i = 0; i < d.m(); ++i) {
    EXPECT_NEAR(hb.gamma(i), fit.gamma(i), 0.02 * std::abs(fit.gamma(i)));
    EXPECT_GT(hb.gamma_variance(i), 0.0);
    EXPECT_GT(hb.theta_variance(i), 0.0);
  }
}

TEST(UnitHb, PriorValidation) {
  std::mt19937_64 rng(66);
  const UnitDataset d = simulate(5, 3, 1, 1.0, 1.0, rng);
  UnitHbPrior prior;
  prior.a1 = 0.0;
  EXPECT_EQ(code_of([&] { unit_hb(d, prior); }), ErrorCode::ImproperPosterior);
  prior.a1 = 1.0;
  prior.g0 = -1.0;
  EXPECT_EQ(code_of([&] { unit_hb(d, prior); }), ErrorCode::ImproperPosterior);
}

TEST(UnitEquivariance, LocationShift) {
  std::mt19937_64 rng(67);
  const oracle::UnitPopulation pop = oracle::random_population(8, 3, 6, 5, rng);
  const UnitDataset d = to_dataset(pop);
  const Vector c = (Vector(3) << 2.0, -1.5, 0.25).finished();
  const UnitDataset s = d.with_response(d.y() + d.X() * c);
  for (UnitMethod method : {UnitMethod::ANOVA, UnitMethod::REML, UnitMethod::ML}) {
    const VarianceComponents a = estimate_components(d, method);
    const VarianceComponents b = estimate_components(s, method);
    // Likelihood maximizers are located to about sqrt(machine epsilon) in rho.
    const double tol = method == UnitMethod::ANOVA ? 1e-10 : 1e-6;
    EXPECT_NEAR(a.sigma2_e, b.sigma2_e, tol * a.sigma2_e);
    EXPECT_NEAR(a.sigma2_v, b.sigma2_v, tol * (a.sigma2_v + a.sigma2_e));
    const UnitFit fa = unit_blup(d, a), fb = unit_blup(s, a);
    EXPECT_LE((fb.beta - fa.beta - c).norm(), 1e-9 * (1.0 + c.norm()));
    for (Index i = 0; i < d.m(); ++i) {
      EXPECT_NEAR(fb.theta(i), fa.theta(i) + d.Xbar().row(i).dot(c), 1e-9 * (1.0 + std::abs(fb.theta(i))));
    }
  }
}

TEST(UnitMse, ThirdTermAgainstMonteCarloVariance) {
  std::mt19937_64 rng(68);
  const int m = 30, ni = 4, reps = 10000;
  const double s2v = 1.0, s2e = 2.0;
  const UnitDataset base = simulate(m, ni, 2, s2v, s2e, rng);
  VarianceComponents truth = components(s2v, s2e);
  truth.method = UnitMethod::ANOVA;
  const MseDecomposition g = unit_mse(base, truth);
  const double scale = ni * ni * std::pow(s2v + s2e / ni, 3.0);
  double s = 0, s2 = 0;
  for (int r = 0; r < reps; ++r) {
    const VarianceComponents c = anova_components(simulate(m, ni, 2, s2v, s2e, rng, &base.X()));
    const double q = s2v * c.sigma2_e - s2e * c.sigma2_v_raw;
    s += q;
    s2 += q * q;
  }
  const double var = s2 / reps - (s / reps) * (s / reps);
  EXPECT_NEAR(g.g3(0) * scale, var, 0.10 * var);
}

TEST(UnitMse, SecondOrderUnbiasedMonteCarlo) {
  std::mt19937_64 rng(69);
  std::normal_distribution<double> z;
  const int m = 50, ni = 4, reps = 20000;
  const double s2v = 1.0, s2e = 2.0;
  const UnitDataset base = simulate(m, ni, 2, s2v, s2e, rng);
  const Vector beta = (Vector(2) << 1.0, 0.7).finished();
  double sq_err = 0.0, est = 0.0;
  for (int r = 0; r < reps; ++r) {
    Vector y(m * ni), theta(m);
    for (int i = 0; i < m; ++i) {
      const double v = std::sqrt(s2v) * z(rng);
      theta(i) = base.Xbar().row(i).dot(beta) + v;
      for (int j = 0; j < ni; ++j) {
        const Index k = i * ni + j;
        y(k) = base.X().row(k).dot(beta) + v + std::sqrt(s2e) * z(rng);
      }
    }
    const UnitDataset d = base.with_response(y);
    const VarianceComponents c = anova_components(d);
    const UnitFit f = unit_blup(d, c);
    sq_err += (f.theta - theta).squaredNorm();
    est += unit_mse(d, c).total.sum();
  }
  EXPECT_NEAR(est / reps, sq_err / reps, 0.05 * sq_err / reps);
}
