#include "sae/numeric/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "sae/error.hpp"

namespace sae::numeric {
namespace {

// Kronrod abscissae (positive half, descending); odd indices are Gauss points.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b;
  std::vector<double> k15, err, l1;
};

class Driver {
 public:
  Driver(const VectorIntegrand& f, std::size_t nc) : f_(f), nc_(nc), buf_(nc) {}

  Panel eval(double a, double b) {
    Panel p{a, b, std::vector<double>(nc_, 0.0), std::vector<double>(nc_, 0.0),
            std::vector<double>(nc_, 0.0)};
    std::vector<double> g7(nc_, 0.0);
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    auto add = [&](double x, double wk, double wg) {
      f_(x, buf_);
      ++evaluations;
      for (std::size_t k = 0; k < nc_; ++k) {
        const double v = buf_[k];
        if (!std::isfinite(v)) {
          fail(ErrorCode::NonConvergence,
               "quadrature: non-finite integrand at x=" + std::to_string(x));
        }
        p.k15[k] += wk * v;
        p.l1[k] += wk * std::fabs(v);
        g7[k] += wg * v;
      }
    };
    add(c, kWgk[7], kWg[3]);
    for (int j = 0; j < 7; ++j) {
      const double wg = (j % 2 == 1) ? kWg[static_cast<std::size_t>(j / 2)] : 0.0;
      add(c - h * kXgk[static_cast<std::size_t>(j)], kWgk[static_cast<std::size_t>(j)], wg);
      add(c + h * kXgk[static_cast<std::size_t>(j)], kWgk[static_cast<std::size_t>(j)], wg);
    }
    for (std::size_t k = 0; k < nc_; ++k) {
      p.k15[k] *= h;
      p.l1[k] *= std::fabs(h);
      p.err[k] = std::fabs(p.k15[k] - h * g7[k]);
    }
    return p;
  }

  std::size_t evaluations = 0;

 private:
  const VectorIntegrand& f_;
  std::size_t nc_;
  std::vector<double> buf_;
};

struct Tally {
  std::vector<double> value, err, l1;
};

Tally totals(const std::vector<Panel>& panels, std::size_t nc) {
  Tally t{std::vector<double>(nc, 0.0), std::vector<double>(nc, 0.0),
          std::vector<double>(nc, 0.0)};
  for (const auto& p : panels) {
    for (std::size_t k = 0; k < nc; ++k) {
      t.value[k] += p.k15[k];
      t.err[k] += p.err[k];
      t.l1[k] += p.l1[k];
    }
  }
  return t;
}

// Subdivides panels in [0,1]-like parameter space; `map` gives (x, jacobian).
template <class Map>
QuadratureRule refine(const VectorIntegrand& f, std::size_t nc, std::vector<double> cuts,
                      const QuadratureOptions& opts, Map map) {
  if (nc == 0) fail(ErrorCode::InvalidArgument, "quadrature: no components");
  VectorIntegrand g = [&](double t, std::span<double> out) {
    const auto [x, jac] = map(t);
    if (!std::isfinite(x) || !std::isfinite(jac)) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    f(x, out);
    for (auto& v : out) v *= jac;
  };
  Driver drv(g, nc);
  std::vector<Panel> panels;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) panels.push_back(drv.eval(cuts[i], cuts[i + 1]));

  for (;;) {
    const Tally t = totals(panels, nc);
    std::vector<double> tol(nc);
    bool done = true;
    for (std::size_t k = 0; k < nc; ++k) {
      tol[k] = std::max(opts.abs_tol, opts.rel_tol * t.l1[k]);
      if (t.err[k] > tol[k]) done = false;
    }
    if (done) break;
    if (drv.evaluations + 30 > opts.max_evaluations) {
      fail(ErrorCode::NonConvergence,
           "quadrature: error target not met after " + std::to_string(drv.evaluations) +
               " evaluations");
    }
    std::size_t worst = 0;
    double worst_score = -1.0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      double score = 0.0;
      for (std::size_t k = 0; k < nc; ++k) {
        if (tol[k] > 0.0) score = std::max(score, panels[i].err[k] / tol[k]);
        else if (panels[i].err[k] > 0.0) score = std::max(score, 1e300);
      }
      if (score > worst_score) {
        worst_score = score;
        worst = i;
      }
    }
    const Panel old = panels[worst];
    const double mid = 0.5 * (old.a + old.b);
    if (!(mid > old.a && mid < old.b)) {
      fail(ErrorCode::NonConvergence, "quadrature: subdivision limit reached");
    }
    panels[worst] = drv.eval(old.a, mid);
    panels.push_back(drv.eval(mid, old.b));
  }

  std::sort(panels.begin(), panels.end(), [](const Panel& l, const Panel& r) { return l.a < r.a; });
  QuadratureRule rule;
  rule.evaluations = drv.evaluations;
  const Tally t = totals(panels, nc);
  rule.values = t.value;
  rule.abs_error_estimates = t.err;
  rule.nodes.reserve(panels.size() * 15);
  rule.weights.reserve(panels.size() * 15);
  for (const auto& p : panels) {
    const double c = 0.5 * (p.a + p.b), h = 0.5 * (p.b - p.a);
    auto push = [&](double tt, double w) {
      const auto [x, jac] = map(tt);
      rule.nodes.push_back(x);
      rule.weights.push_back(w * h * jac);
    };
    for (std::size_t j = 0; j < 7; ++j) push(c - h * kXgk[j], kWgk[j]);
    push(c, kWgk[7]);
    for (std::size_t j = 7; j-- > 0;) push(c + h * kXgk[j], kWgk[j]);
  }
  return rule;
}

std::vector<double> make_cuts(double a, double b, std::span<const double> inner) {
  std::vector<double> cuts{a};
  for (double x : inner) {
    if (x > a && x < b) cuts.push_back(x);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

QuadratureResult scalar_result(const QuadratureRule& r) {
  return {r.values[0], r.abs_error_estimates[0], r.evaluations};
}

}  // namespace

double QuadratureRule::apply(const std::function<double(double)>& h) const {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * h(nodes[i]);
  return s;
}

QuadratureRule adaptive_rule(const VectorIntegrand& f, std::size_t components, double a,
                             double b, std::span<const double> breakpoints,
                             const QuadratureOptions& opts) {
  if (!(a < b)) fail(ErrorCode::InvalidArgument, "quadrature: need a < b");
  return refine(f, components, make_cuts(a, b, breakpoints), opts,
                [](double t) { return std::pair<double, double>{t, 1.0}; });
}

QuadratureRule adaptive_rule_halfline(const VectorIntegrand& f, std::size_t components,
                                      double scale, std::span<const double> breakpoints,
                                      const QuadratureOptions& opts) {
  if (!(scale > 0.0)) fail(ErrorCode::InvalidArgument, "quadrature: scale must be positive");
  // x = scale (t / (1 - t))^2 keeps integrands decaying like x^{-3/2} bounded at t = 1.
  std::vector<double> inner;
  for (double x : breakpoints) {
    if (x > 0.0 && std::isfinite(x)) {
      const double r = std::sqrt(x / scale);
      inner.push_back(r / (1.0 + r));
    }
  }
  return refine(f, components, make_cuts(0.0, 1.0, inner), opts, [scale](double t) {
    const double u = 1.0 - t;
    const double r = t / u;
    return std::pair<double, double>{scale * r * r, 2.0 * scale * t / (u * u * u)};
  });
}

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts) {
  VectorIntegrand v = [&](double x, std::span<double> out) { out[0] = f(x); };
  return scalar_result(adaptive_rule(v, 1, a, b, {}, opts));
}

QuadratureResult integrate_unit_interval(const std::function<double(double)>& f,
                                         const QuadratureOptions& opts) {
  return integrate(f, 0.0, 1.0, opts);
}

QuadratureResult integrate_positive_halfline(const std::function<double(double)>& g, double tol) {
  QuadratureOptions opts;
  opts.rel_tol = tol;
  return integrate_positive_halfline(g, 1.0, opts);
}

QuadratureResult integrate_positive_halfline(const std::function<double(double)>& g,
                                             double scale, const QuadratureOptions& opts) {
  VectorIntegrand v = [&](double x, std::span<double> out) { out[0] = g(x); };
  return scalar_result(adaptive_rule_halfline(v, 1, scale, {}, opts));
}

}  // namespace sae::numeric
