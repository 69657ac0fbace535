#include "sae/cli/run.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "sae/cli/csv.hpp"
#include "sae/error.hpp"
#include "sae/fay_herriot.hpp"
#include "sae/hb.hpp"
#include "sae/numeric/roots.hpp"
#include "sae/uncertainty.hpp"

namespace sae::cli {
namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::vector<double> vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::string join(const Vector& v) {
  std::string out;
  for (Index k = 0; k < v.size(); ++k) out += (k ? " " : "") + format_full(v(k));
  return out;
}

std::string full_or_inf(double x) { return std::isfinite(x) ? format_full(x) : std::string("inf"); }

Report start(const RunConfig& c, const std::vector<std::string>& ids) {
  Report r;
  r.ids = ids;
  r.set_meta("tool_version", kToolVersion);
  r.set_meta("model", c.model);
  r.set_meta("seed", std::to_string(c.seed));
  r.set_meta("alpha", format_full(c.alpha));
  std::string measures;
  for (const auto& m : c.measures) measures += (measures.empty() ? "" : ",") + m;
  r.set_meta("measures", measures);
  return r;
}

HbOptions hb_options(const RunConfig& c) {
  HbOptions o;
  o.rel_tol = c.quadrature_tol;
  return o;
}

void add_intervals(Report& r, const RunConfig& c, const AreaDataset& data, const FayHerriotFit& fit) {
  if (!c.interval_mode) return;
  if (*c.interval_mode == IntervalMode::KNOWN_A) {
    fail(ErrorCode::ValidationError, "interval mode KNOWN_A needs a true A and is only available in coverage runs");
  }
  IntervalSpec spec;
  spec.alpha = c.alpha;
  spec.mode = *c.interval_mode;
  std::vector<double> lo, hi;
  for (Index i = 0; i < data.m(); ++i) {
    const Interval iv = make_interval(data, spec, i, &fit);
    lo.push_back(iv.lo);
    hi.push_back(iv.hi);
  }
  r.set_meta("interval_mode", std::string(to_string(*c.interval_mode)));
  r.add_column("interval_lo", lo);
  r.add_column("interval_hi", hi);
}

}  // namespace

void RunConfig::validate() const {
  if (model != "area" && model != "area-general-v" && model != "unit") {
    fail(ErrorCode::ValidationError, "unknown model '" + model + "'");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::ValidationError, "alpha must lie in (0, 1)");
  if (!(quadrature_tol > 0.0 && quadrature_tol < 1.0)) {
    fail(ErrorCode::ValidationError, "quadrature tolerance must lie in (0, 1)");
  }
  for (const auto& m : measures) {
    if (m != "PR" && m != "MORRIS" && m != "HB") fail(ErrorCode::ValidationError, "unknown measure '" + m + "'");
    if (m == "MORRIS" && model != "area") {
      fail(ErrorCode::ValidationError, "measure MORRIS is only defined for the area model");
    }
  }
  if (output_format != "csv" && output_format != "json") {
    fail(ErrorCode::ValidationError, "unknown output format '" + output_format + "'");
  }
}

bool RunConfig::wants(const std::string& measure) const {
  return std::find(measures.begin(), measures.end(), measure) != measures.end();
}

std::vector<std::string> parse_measures(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
               item.end());
    if (item.empty()) continue;
    item = upper(item);
    if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
  }
  return out;
}

Report run_fit(const RunConfig& c, const AreaDataset& data) {
  c.validate();
  if (c.model != "area") fail(ErrorCode::ValidationError, "run_fit expects the area model");
  const VarianceMethod method = parse_variance_method(c.method);
  const FayHerriotFit fit = estimate_A(data, method);

  Report r = start(c, data.area_ids);
  r.set_meta("method", std::string(to_string(method)));
  r.set_meta("A_hat", format_full(fit.A_hat));
  r.set_meta("beta_hat", join(fit.beta_hat));
  r.set_meta("at_boundary", fit.at_boundary ? "true" : "false");
  r.add_column("direct", vec(data.y));
  r.add_column("V", vec(data.V));
  r.add_column("synthetic", vec(data.X * fit.beta_hat));
  r.add_column("B_hat", vec(fit.B_hat));
  r.add_column("eblup", vec(fit.theta_hat));
  r.display_column = "eblup";

  if (c.wants("PR")) {
    const MseDecomposition s = mse_second_order(data, fit);
    r.set_meta("pr_boundary_warning", s.boundary_warning ? "true" : "false");
    r.add_column("pr_g1", vec(s.corrected_g1()));
    r.add_column("pr_g2", vec(s.g2));
    r.add_column("pr_g3", vec(s.g3));
    r.add_column("pr_mse", vec(s.total));
  }
  if (c.wants("MORRIS")) {
    const MorrisFit mo = morris_measure(data, fit.A_hat, fit.beta_hat);
    r.add_column("morris_theta", vec(mo.theta_M));
    r.add_column("morris_g1", vec(mo.g1));
    r.add_column("morris_g2", vec(mo.g2));
    r.add_column("morris_g3", vec(mo.g3));
    r.add_column("morris_var", vec(mo.g1 + mo.g2 + mo.g3));
  }
  if (c.wants("HB")) {
    const HbPosterior post = posterior_A(data, HbPrior::UniformA, hb_options(c));
    const HbEstimate e = hb_estimate(data, post);
    r.set_meta("hb_E_A", full_or_inf(post.E_A));
    r.set_meta("hb_mode_A", format_full(post.mode_A));
    r.set_meta("hb_mass_near_zero", format_full(post.mass_near_zero));
    r.add_column("hb_theta", vec(e.theta));
    r.add_column("hb_g1", vec(e.g1));
    r.add_column("hb_g2", vec(e.g2));
    r.add_column("hb_g3", vec(e.g3));
    r.add_column("hb_var", vec(e.variance));
  }
  add_intervals(r, c, data, fit);
  return r;
}

Report run_intervals(const RunConfig& c, const AreaDataset& data) {
  c.validate();
  if (!c.interval_mode) fail(ErrorCode::ValidationError, "no interval mode given");
  const VarianceMethod method = parse_variance_method(c.method);
  const FayHerriotFit fit = estimate_A(data, method);
  Report r = start(c, data.area_ids);
  r.set_meta("method", std::string(to_string(method)));
  r.set_meta("A_hat", format_full(fit.A_hat));
  r.add_column("direct", vec(data.y));
  IntervalSpec spec;
  spec.alpha = c.alpha;
  spec.mode = *c.interval_mode;
  if (spec.mode == IntervalMode::KNOWN_A) {
    fail(ErrorCode::ValidationError, "interval mode KNOWN_A needs a true A and is only available in coverage runs");
  }
  std::vector<double> center, lo, hi, cutoff;
  std::size_t warnings = 0;
  for (Index i = 0; i < data.m(); ++i) {
    const Interval iv = make_interval(data, spec, i, &fit);
    center.push_back(iv.center);
    lo.push_back(iv.lo);
    hi.push_back(iv.hi);
    cutoff.push_back(iv.cutoff);
    if (iv.leverage_warning) ++warnings;
  }
  r.set_meta("interval_mode", std::string(to_string(spec.mode)));
  r.set_meta("leverage_warnings", std::to_string(warnings));
  r.add_column("center", center);
  r.add_column("lo", lo);
  r.add_column("hi", hi);
  r.add_column("cutoff", cutoff);
  r.display_column = "center";
  return r;
}

Report run_general_v_fit(const RunConfig& c, const GeneralVModel& model,
                         const std::vector<std::string>& ids) {
  c.validate();
  model.validate();
  // REML: the flat-prior log posterior of A is the restricted log-likelihood.
  const double s = model.V.dense().diagonal().mean();
  auto nll = [&](double A) { return -log_posterior_A(model, A); };
  constexpr int kGrid = 120;
  double best_A = 0.0, best = nll(0.0);
  std::vector<double> grid{0.0};
  for (int k = 0; k <= kGrid; ++k) grid.push_back(1e-8 * s * std::pow(1e16, static_cast<double>(k) / kGrid));
  std::size_t best_k = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double v = nll(grid[k]);
    if (v < best) {
      best = v;
      best_A = grid[k];
      best_k = k;
    }
  }
  if (best_k > 0) {
    const auto mn = numeric::brent_minimize(nll, grid[best_k - 1], grid[std::min(best_k + 1, grid.size() - 1)], 52);
    if (mn.fx <= best) best_A = mn.x;
  }

  Report r = start(c, ids);
  r.set_meta("method", "REML");
  r.set_meta("A_hat", format_full(best_A));
  const Vector beta = general_v_gls_beta(model, best_A);
  r.set_meta("beta_hat", join(beta));
  r.add_column("direct", vec(model.y));
  r.add_column("synthetic", vec(model.X * beta));
  r.add_column("eblup", vec(general_v_blup(model, best_A)));
  r.display_column = "eblup";
  if (c.wants("PR")) {
    r.add_column("pr_mse", vec(general_v_plugin_mse(model, best_A).dense().diagonal()));
  }
  if (c.wants("HB")) {
    const GeneralVHb hb = general_v_hb(model, hb_options(c));
    r.set_meta("hb_E_A", full_or_inf(hb.posterior.E_A));
    r.add_column("hb_theta", vec(hb.theta));
    r.add_column("hb_var", vec(hb.covariance.dense().diagonal()));
  }
  return r;
}

Report run_unit_fit(const RunConfig& c, const UnitDataset& data) {
  c.validate();
  const UnitMethod method = parse_unit_method(c.method);
  const VarianceComponents psi = estimate_components(data, method);
  const UnitFit fit = unit_blup(data, psi);

  Report r = start(c, data.area_ids());
  r.set_meta("method", std::string(to_string(method)));
  r.set_meta("sigma2_e", format_full(psi.sigma2_e));
  r.set_meta("sigma2_v", format_full(psi.sigma2_v));
  r.set_meta("sigma2_v_truncated", psi.truncated ? "true" : "false");
  r.set_meta("beta_hat", join(fit.beta));
  std::vector<double> n;
  for (Index i = 0; i < data.m(); ++i) n.push_back(static_cast<double>(data.n_i(i)));
  r.add_column("n", n);
  r.add_column("N", vec(data.N()));
  r.add_column("direct", vec(data.ybar_s()));
  r.add_column("synthetic", vec(data.Xbar() * fit.beta));
  r.add_column("delta", vec(fit.delta));
  r.add_column("theta", vec(fit.theta));
  r.add_column("gamma", vec(fit.gamma));
  r.display_column = "gamma";
  if (c.wants("PR")) {
    const MseDecomposition s = unit_mse(data, psi);
    r.set_meta("pr_boundary_warning", s.boundary_warning ? "true" : "false");
    r.add_column("pr_g1", vec(s.g1));
    r.add_column("pr_g2", vec(s.g2));
    r.add_column("pr_g3", vec(s.g3));
    r.add_column("pr_mse", vec(s.total));
  }
  if (c.wants("HB")) {
    const UnitHbResult hb = unit_hb(data, UnitHbPrior{}, hb_options(c));
    r.set_meta("hb_E_lambda", full_or_inf(hb.lambda_posterior.E_A));
    r.add_column("hb_gamma", vec(hb.gamma));
    r.add_column("hb_gamma_var", vec(hb.gamma_variance));
    r.add_column("hb_theta", vec(hb.theta));
    r.add_column("hb_theta_var", vec(hb.theta_variance));
  }
  return r;
}

std::string run_coverage(const CoverageConfig& config) { return coverage_simulator(config).to_csv(); }

}  // namespace sae::cli
