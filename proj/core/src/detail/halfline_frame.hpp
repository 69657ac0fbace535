#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <functional>
#include <limits>
#include <span>
#include <string>

#include "sae/error.hpp"
#include "sae/hb.hpp"
#include "sae/numeric/quadrature.hpp"
#include "sae/numeric/roots.hpp"

namespace sae::detail {

constexpr double kDropNats = 40.0;

struct Frame {
  double mode = 0.0;
  double l0 = 0.0;
  double scale = 1.0;
  std::vector<double> breaks;
};

// Locates the mode and the 40-nat bracket of a log-density on [0, inf).
template <class LogDensity>
inline Frame locate(const LogDensity& ld, double v_mean) {
  Frame f;
  const double s = v_mean > 0.0 ? v_mean : 1.0;
  constexpr int kGrid = 160;
  const double lo = 1e-10 * s, hi = 1e10 * s;
  double best_x = 0.0, best = ld(0.0);
  int best_k = -1;
  std::vector<double> xs(kGrid + 1);
  for (int k = 0; k <= kGrid; ++k) {
    xs[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, static_cast<double>(k) / kGrid);
    const double v = ld(xs[static_cast<std::size_t>(k)]);
    if (v > best) {
      best = v;
      best_x = xs[static_cast<std::size_t>(k)];
      best_k = k;
    }
  }
  if (best_k >= 0) {
    const double a = best_k > 0 ? xs[static_cast<std::size_t>(best_k - 1)] : 0.0;
    const double b = xs[static_cast<std::size_t>(std::min(best_k + 1, kGrid))];
    const auto m = numeric::brent_minimize([&](double x) { return -ld(x); }, a, b, 52);
    if (-m.fx > best) {
      best = -m.fx;
      best_x = m.x;
    }
  }
  f.mode = best_x;
  f.l0 = best;
  f.scale = std::max(f.mode, s);

  auto drop = [&](double x) { return ld(x) - (f.l0 - kDropNats); };
  double upper = std::max(f.mode, s);
  int doublings = 0;
  while (drop(upper) > 0.0 && doublings < 200) {
    upper *= 2.0;
    ++doublings;
  }
  if (f.mode > 0.0) f.breaks.push_back(f.mode);
  if (drop(upper) <= 0.0) {
    const double a_hi = numeric::brent_root(drop, std::max(f.mode, 0.5 * upper), upper,
                                            1e-6 * upper);
    f.breaks.push_back(a_hi);
    f.breaks.push_back(0.5 * (f.mode + a_hi));
  }
  const double floor = std::isfinite(ld(0.0)) ? 0.0 : lo;
  if (f.mode > floor && drop(floor) < 0.0) {
    f.breaks.push_back(numeric::brent_root(drop, floor, f.mode, 1e-9 * f.mode));
  }
  return f;
}

inline double mass_below(const std::function<double(double)>& dens, double eps, double Z) {
  numeric::QuadratureOptions o;
  o.rel_tol = 1e-6;
  return numeric::integrate(dens, 0.0, eps, o).value / Z;
}

inline HbPosterior point_mass_posterior(double A, double ld) {
  HbPosterior post;
  post.grid = Vector::Constant(1, A);
  post.log_density = Vector::Zero(1);
  post.weights = Vector::Ones(1);
  post.log_normalizer = ld;
  post.E_A = A;
  post.mode_A = A;
  post.point_mass = true;
  post.evaluations = 1;
  return post;
}

// Builds the posterior rule; `extra` adds density-weighted driving components.
template <class LogDensity, class Extra>
HbPosterior build_posterior(const LogDensity& ld, bool mean_exists, double v_mean,
                            std::size_t n_extra, const Extra& extra, const HbOptions& opts) {
  const Frame fr = locate(ld, v_mean);
  const std::size_t base = mean_exists ? 2 : 1;
  numeric::VectorIntegrand f = [&](double A, std::span<double> out) {
    const double d = std::exp(ld(A) - fr.l0);
    if (!(d > 0.0)) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    out[0] = d;
    if (mean_exists) out[1] = A * d;
    if (n_extra > 0) {
      extra(A, out.subspan(base));
      for (std::size_t k = base; k < out.size(); ++k) out[k] *= d;
    }
  };
  numeric::QuadratureOptions qo;
  qo.rel_tol = opts.rel_tol;
  qo.max_evaluations = opts.max_evaluations;
  const numeric::QuadratureRule rule =
      numeric::adaptive_rule_halfline(f, base + n_extra, fr.scale, fr.breaks, qo);

  HbPosterior post;
  const double Z = rule.values[0];
  if (!(Z > 0.0) || !std::isfinite(Z)) fail(ErrorCode::NonConvergence, "posterior normalizer not finite");
  post.log_normalizer = fr.l0 + std::log(Z);
  post.normalizer_rel_error = rule.abs_error_estimates[0] / Z;
  post.E_A = mean_exists ? rule.values[1] / Z : std::numeric_limits<double>::infinity();
  post.mode_A = fr.mode;
  post.evaluations = rule.evaluations;
  const std::size_t n = rule.nodes.size();
  post.grid.resize(static_cast<Index>(n));
  post.log_density.resize(static_cast<Index>(n));
  post.weights.resize(static_cast<Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Index>(k);
    post.grid(i) = rule.nodes[k];
    post.log_density(i) = ld(rule.nodes[k]) - fr.l0;
    post.weights(i) = rule.weights[k] * std::exp(post.log_density(i)) / Z;
  }
  post.evaluations += n;
  const double eps = 1e-8 * v_mean;
  post.mass_near_zero = mass_below([&](double A) { return std::exp(ld(A) - fr.l0); }, eps, Z);
  post.near_zero_flag = post.mass_near_zero > 0.01;
  return post;
}

}  // namespace sae::detail
