#pragma once

// Randomized invariance checks shared by the property tests and the
// acceptance driver. Each check returns an empty string on success.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sae/coverage.hpp"
#include "sae/error.hpp"
#include "sae/fay_herriot.hpp"
#include "sae/hb.hpp"
#include "sae/intervals.hpp"
#include "sae/uncertainty.hpp"
#include "sae/unit_level.hpp"

namespace invariants {

using namespace sae;

inline AreaDataset random_area(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> md(8, 30), pd(1, 3);
  std::uniform_real_distribution<double> vd(0.3, 3.0);
  std::normal_distribution<double> z;
  const int m = md(rng), p = pd(rng);
  Matrix X(m, p);
  Vector y(m), V(m);
  const double A = 0.2 + 2.0 * vd(rng);
  for (int i = 0; i < m; ++i) {
    X(i, 0) = 1.0;
    for (int a = 1; a < p; ++a) X(i, a) = z(rng);
    V(i) = vd(rng);
    y(i) = 1.0 + (p > 1 ? X(i, 1) : 0.0) + std::sqrt(A) * z(rng) + std::sqrt(V(i)) * z(rng);
  }
  return AreaDataset::make(y, X, V);
}

inline UnitDataset random_unit(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> md(4, 12), nd(2, 6), ed(0, 20), pd(1, 3);
  std::normal_distribution<double> z;
  const int m = md(rng), p = pd(rng);
  std::vector<Index> n(m);
  Vector N(m);
  int tot = 0;
  for (int i = 0; i < m; ++i) {
    n[i] = nd(rng);
    N(i) = static_cast<double>(n[i] + ed(rng));
    tot += static_cast<int>(n[i]);
  }
  Matrix X(tot, p), Xbar(m, p);
  Vector y(tot);
  int off = 0;
  for (int i = 0; i < m; ++i) {
    const double v = z(rng);
    for (int j = 0; j < n[i]; ++j) {
      X(off + j, 0) = 1.0;
      for (int a = 1; a < p; ++a) X(off + j, a) = z(rng) + 0.2 * i;
      y(off + j) = 2.0 + (p > 1 ? 0.5 * X(off + j, 1) : 0.0) + v + 1.3 * z(rng);
    }
    Xbar.row(i) = X.middleRows(off, n[i]).colwise().mean();
    for (int a = 1; a < p; ++a) Xbar(i, a) += 0.1 * z(rng);
    off += static_cast<int>(n[i]);
  }
  return UnitDataset::from_grouped(n, y, X, N, Xbar);
}

inline std::vector<Index> random_perm(Index m, std::mt19937_64& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

inline bool close(double a, double b, double rel, double abs = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs;
}

inline std::string fail_msg(const char* what, double a, double b) {
  std::ostringstream os;
  os.precision(17);
  os << what << ": " << a << " vs " << b;
  return os.str();
}

// Area-level estimates, MSEs and HB moments follow a permutation of the areas.
inline std::string area_permutation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const AreaDataset d = random_area(rng);
  const std::vector<Index> perm = random_perm(d.m(), rng);
  const AreaDataset q = d.permuted(perm);
  const double scale = d.V.mean();
  for (VarianceMethod method : {VarianceMethod::FH_MOMENT, VarianceMethod::PR_ANOVA, VarianceMethod::ML,
                                VarianceMethod::REML}) {
    const FayHerriotFit a = estimate_A(d, method), b = estimate_A(q, method);
    if (!close(a.A_hat, b.A_hat, 1e-7, 1e-9 * scale)) return fail_msg("A_hat", a.A_hat, b.A_hat);
    const MseDecomposition ma = mse_second_order(d, a), mb = mse_second_order(q, b);
    for (Index k = 0; k < d.m(); ++k) {
      const Index i = perm[static_cast<std::size_t>(k)];
      if (!close(a.theta_hat(i), b.theta_hat(k), 1e-7, 1e-9)) return fail_msg("theta", a.theta_hat(i), b.theta_hat(k));
      if (!close(ma.total(i), mb.total(k), 1e-6, 1e-9)) return fail_msg("mse", ma.total(i), mb.total(k));
    }
  }
  HbOptions opts;
  opts.rel_tol = 1e-8;
  const HbEstimate ha = hb_estimate(d, posterior_A(d, HbPrior::UniformA, opts));
  const HbEstimate hb = hb_estimate(q, posterior_A(q, HbPrior::UniformA, opts));
  for (Index k = 0; k < d.m(); ++k) {
    const Index i = perm[static_cast<std::size_t>(k)];
    if (!close(ha.theta(i), hb.theta(k), 1e-6, 1e-9)) return fail_msg("hb theta", ha.theta(i), hb.theta(k));
    if (!close(ha.variance(i), hb.variance(k), 1e-5)) return fail_msg("hb variance", ha.variance(i), hb.variance(k));
  }
  return {};
}

// y -> y + Xc shifts beta by c and every predictor by x_i^T c; A-hat, MSEs
// and interval widths are unchanged.
inline std::string area_location(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const AreaDataset d = random_area(rng);
  Vector c(d.p());
  for (Index a = 0; a < d.p(); ++a) c(a) = 3.0 * z(rng);
  AreaDataset s = d;
  s.y = d.y + d.X * c;
  const Vector shift = d.X * c;
  for (VarianceMethod method : {VarianceMethod::FH_MOMENT, VarianceMethod::PR_ANOVA, VarianceMethod::ML,
                                VarianceMethod::REML}) {
    const FayHerriotFit a = estimate_A(d, method), b = estimate_A(s, method);
    if (!close(a.A_hat, b.A_hat, 1e-7, 1e-9)) return fail_msg("A_hat", a.A_hat, b.A_hat);
    if ((b.beta_hat - a.beta_hat - c).norm() > 1e-7 * (1.0 + c.norm())) return "beta shift";
    const MseDecomposition ma = mse_second_order(d, a), mb = mse_second_order(s, b);
    for (Index i = 0; i < d.m(); ++i) {
      if (!close(a.theta_hat(i) + shift(i), b.theta_hat(i), 1e-7, 1e-8)) {
        return fail_msg("theta shift", a.theta_hat(i) + shift(i), b.theta_hat(i));
      }
      if (!close(ma.total(i), mb.total(i), 1e-6, 1e-9)) return fail_msg("mse", ma.total(i), mb.total(i));
    }
    if (method == VarianceMethod::REML && a.A_hat > 1e-6) {
      const Interval ia = smith_t6_interval(d, a, 0, 0.05), ib = smith_t6_interval(s, b, 0, 0.05);
      if (!close(ia.half_width, ib.half_width, 1e-6)) return fail_msg("smith width", ia.half_width, ib.half_width);
    }
  }
  HbOptions opts;
  opts.rel_tol = 1e-8;
  const HbEstimate ha = hb_estimate(d, posterior_A(d, HbPrior::UniformA, opts));
  const HbEstimate hb = hb_estimate(s, posterior_A(s, HbPrior::UniformA, opts));
  for (Index i = 0; i < d.m(); ++i) {
    if (!close(ha.theta(i) + shift(i), hb.theta(i), 1e-6, 1e-8)) return fail_msg("hb shift", ha.theta(i) + shift(i), hb.theta(i));
    if (!close(ha.variance(i), hb.variance(i), 1e-5)) return fail_msg("hb variance", ha.variance(i), hb.variance(i));
  }
  // Balanced intervals: same width, center shifted.
  const AreaDataset bd = d.with_common_V(1.0), bs = s.with_common_V(1.0);
  if (bd.m() > bd.p() + 3) {
    IntervalSpec spec;
    try {
      const Interval ia = t4_calibrated_interval(bd, spec, 0), ib = t4_calibrated_interval(bs, spec, 0);
      if (!close(ia.half_width, ib.half_width, 1e-9)) return fail_msg("t4 width", ia.half_width, ib.half_width);
      if (!close(ia.center + shift(0), ib.center, 1e-9, 1e-9)) return fail_msg("t4 center", ia.center + shift(0), ib.center);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateShrinkage) throw;
    }
  }
  return {};
}

inline UnitDataset permute_units(const UnitDataset& d, const std::vector<Index>& perm) {
  std::vector<Index> n;
  Vector y(d.n()), N(d.m());
  Matrix X(d.n(), d.p()), Xbar(d.m(), d.p());
  Index off = 0;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const Index i = perm[k];
    n.push_back(d.n_i(i));
    y.segment(off, d.n_i(i)) = d.y().segment(d.offset(i), d.n_i(i));
    X.middleRows(off, d.n_i(i)) = d.X().middleRows(d.offset(i), d.n_i(i));
    N(static_cast<Index>(k)) = d.N()(i);
    Xbar.row(static_cast<Index>(k)) = d.Xbar().row(i);
    off += d.n_i(i);
  }
  return UnitDataset::from_grouped(n, y, X, N, Xbar);
}

// Unit-level components and predictors follow an area permutation and a
// location shift.
inline std::string unit_invariance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const UnitDataset d = random_unit(rng);
  const std::vector<Index> perm = random_perm(d.m(), rng);
  const UnitDataset q = permute_units(d, perm);
  Vector c(d.p());
  for (Index a = 0; a < d.p(); ++a) c(a) = 2.0 * z(rng);
  const UnitDataset s = d.with_response(d.y() + d.X() * c);
  for (UnitMethod method : {UnitMethod::ANOVA, UnitMethod::REML}) {
    const VarianceComponents a = estimate_components(d, method);
    const VarianceComponents b = estimate_components(q, method);
    const VarianceComponents t = estimate_components(s, method);
    const double tol = method == UnitMethod::ANOVA ? 1e-9 : 1e-6;
    const double sc = a.sigma2_e + a.sigma2_v;
    if (!close(a.sigma2_e, b.sigma2_e, tol, 1e-12) || !close(a.sigma2_v, b.sigma2_v, tol, tol * sc)) {
      return fail_msg("unit components perm", a.sigma2_v, b.sigma2_v);
    }
    if (!close(a.sigma2_e, t.sigma2_e, tol, 1e-12) || !close(a.sigma2_v, t.sigma2_v, tol, tol * sc)) {
      return fail_msg("unit components shift", a.sigma2_v, t.sigma2_v);
    }
    const UnitFit fa = unit_blup(d, a), fb = unit_blup(q, a), fs = unit_blup(s, a);
    for (Index k = 0; k < d.m(); ++k) {
      const Index i = perm[static_cast<std::size_t>(k)];
      if (!close(fa.gamma(i), fb.gamma(k), 1e-9, 1e-9)) return fail_msg("unit gamma perm", fa.gamma(i), fb.gamma(k));
    }
    for (Index i = 0; i < d.m(); ++i) {
      const double ex = fa.theta(i) + d.Xbar().row(i).dot(c);
      if (!close(ex, fs.theta(i), 1e-9, 1e-9)) return fail_msg("unit theta shift", ex, fs.theta(i));
    }
  }
  return {};
}

// Identical inputs give bit-identical outputs, including seeded simulators.
inline std::string determinism(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const AreaDataset d = random_area(rng);
  for (VarianceMethod method : {VarianceMethod::FH_MOMENT, VarianceMethod::REML}) {
    const FayHerriotFit a = estimate_A(d, method), b = estimate_A(d, method);
    if (a.A_hat != b.A_hat || a.theta_hat != b.theta_hat) return "fit not deterministic";
    if (mse_second_order(d, a).total != mse_second_order(d, b).total) return "mse not deterministic";
  }
  HbOptions opts;
  opts.rel_tol = 1e-7;
  const HbPosterior pa = posterior_A(d, HbPrior::UniformA, opts), pb = posterior_A(d, HbPrior::UniformA, opts);
  if (pa.grid != pb.grid || pa.weights != pb.weights) return "posterior not deterministic";
  const std::uint64_t sim_seed = seed * 7919 + 1;
  const MseMonteCarlo ma = mse_monte_carlo(d.X, d.V, 1.0, Vector::Zero(d.p()), VarianceMethod::REML, 20, sim_seed);
  const MseMonteCarlo mb = mse_monte_carlo(d.X, d.V, 1.0, Vector::Zero(d.p()), VarianceMethod::REML, 20, sim_seed);
  if (ma.empirical_mse != mb.empirical_mse || ma.mean_mse_s != mb.mean_mse_s) return "mse Monte Carlo not deterministic";
  CoverageConfig cfg;
  cfg.m = 12;
  cfg.B_values = {0.5};
  cfg.modes = {IntervalMode::NAIVE, IntervalMode::CALIBRATED_T4};
  cfg.reps = 1000;
  cfg.seed = sim_seed;
  cfg.threads = 1;
  const std::string ca = coverage_simulator(cfg).to_csv();
  cfg.threads = 2;
  if (coverage_simulator(cfg).to_csv() != ca) return "coverage depends on threads";
  const UnitDataset u = random_unit(rng);
  const VarianceComponents va = estimate_components(u, UnitMethod::REML), vb = estimate_components(u, UnitMethod::REML);
  if (va.sigma2_v != vb.sigma2_v || va.sigma2_e != vb.sigma2_e) return "unit components not deterministic";
  return {};
}

}  // namespace invariants
