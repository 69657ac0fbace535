#include "sae/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "sae/error.hpp"
#include "sae/numeric/normal.hpp"
#include "sae/numeric/random.hpp"
#include "sae/uncertainty.hpp"

namespace sae {
namespace {

constexpr std::size_t kChunks = 64;

struct Tally {
  std::vector<long> hits, total, refused;
  std::vector<long> bin_hits, bin_total;
  std::vector<double> bin_pred;
  explicit Tally(std::size_t modes = 0, std::size_t bins = 0)
      : hits(modes, 0), total(modes, 0), refused(modes, 0), bin_hits(bins, 0),
        bin_total(bins, 0), bin_pred(bins, 0.0) {}
  void merge(const Tally& o) {
    for (std::size_t k = 0; k < hits.size(); ++k) {
      hits[k] += o.hits[k];
      total[k] += o.total[k];
      refused[k] += o.refused[k];
    }
    for (std::size_t k = 0; k < bin_hits.size(); ++k) {
      bin_hits[k] += o.bin_hits[k];
      bin_total[k] += o.bin_total[k];
      bin_pred[k] += o.bin_pred[k];
    }
  }
};

struct Setting {
  double A;
  Vector V;
  double B_area;
};

std::string fmt(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(10);
  os << x;
  return os.str();
}

}  // namespace

std::string CoverageTable::to_csv() const {
  std::ostringstream os;
  os << "mode,B,m,reps,coverage,se\n";
  for (const auto& r : rows) {
    os << to_string(r.mode) << ',' << fmt(r.B) << ',' << r.m << ',' << r.reps << ','
       << fmt(r.coverage) << ',' << fmt(r.se) << '\n';
  }
  return os.str();
}

CoverageTable coverage_simulator(const CoverageConfig& cfg) {
  if (cfg.reps < 1000) fail(ErrorCode::ValidationError, "coverage simulation needs reps >= 1000");
  if (cfg.modes.empty()) fail(ErrorCode::ValidationError, "no interval modes requested");
  const Matrix X = cfg.X.size() > 0 ? cfg.X : intercept_design(cfg.m);
  const Index m = X.rows(), p = X.cols();
  if (cfg.area < 0 || cfg.area >= m) fail(ErrorCode::InvalidArgument, "area index out of range");
  const Index d = cfg.d.value_or(p + 2);
  if (d <= p) fail(ErrorCode::ValidationError, "interval tuning d must exceed p");
  if (m <= p + 2) fail(ErrorCode::TooFewAreas, "coverage simulation needs m > p + 2");

  std::vector<Setting> settings;
  const bool balanced = cfg.A_values.empty();
  if (balanced) {
    for (double B : cfg.B_values) {
      if (!(B > 0.0 && B < 1.0)) fail(ErrorCode::DomainError, "B must lie in (0, 1)");
      settings.push_back({cfg.V * (1.0 - B) / B, Vector::Constant(m, cfg.V), B});
    }
  } else {
    if (cfg.V_pattern.size() != m) fail(ErrorCode::ValidationError, "V_pattern length differs from m");
    for (double A : cfg.A_values) {
      const double Va = cfg.V_pattern(cfg.area);
      settings.push_back({A, cfg.V_pattern, Va / (Va + A)});
    }
  }
  for (IntervalMode mode : cfg.modes) {
    if (!balanced && mode != IntervalMode::SMITH_T6 && mode != IntervalMode::NAIVE) {
      fail(ErrorCode::ValidationError,
           std::string("mode ") + std::string(to_string(mode)) + " needs a balanced design");
    }
  }

  const Matrix H = X * numeric::SpdFactor(numeric::cross_product(X)).solve(Matrix(X.transpose()));
  const Vector h = H.diagonal();
  const Index a = cfg.area;
  const double z = numeric::z_two_sided(cfg.alpha);
  const double mp = static_cast<double>(m - p);
  const std::size_t nb = cfg.u_bin_edges.size() > 1 ? cfg.u_bin_edges.size() - 1 : 0;
  const std::size_t nm = cfg.modes.size();
  unsigned nthreads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned>(nthreads, kChunks);

  CoverageTable table;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    const Setting& st = settings[s];
    const std::uint64_t setting_seed = numeric::derive_seed(cfg.seed, s);
    std::vector<Tally> chunks(kChunks, Tally(nm, nb));

    auto run_chunk = [&](std::size_t c) {
      Tally& t = chunks[c];
      const long lo = static_cast<long>(c) * cfg.reps / static_cast<long>(kChunks);
      const long hi = static_cast<long>(c + 1) * cfg.reps / static_cast<long>(kChunks);
      AreaDataset data{{}, Vector(m), X, st.V};
      Vector theta(m);
      for (long r = lo; r < hi; ++r) {
        auto rng = numeric::RandomStream::substream(setting_seed, static_cast<std::uint64_t>(r));
        for (Index i = 0; i < m; ++i) {
          theta(i) = std::sqrt(st.A) * rng.normal();
          data.y(i) = theta(i) + std::sqrt(st.V(i)) * rng.normal();
        }
        const double target = theta(a);
        double fitted_a = 0.0, S = 0.0, Bd = 0.0, U = 0.0;
        if (balanced) {
          const Vector fitted = H * data.y;
          fitted_a = fitted(a);
          S = (data.y - fitted).squaredNorm();
          Bd = B_hat_d(S, cfg.V, m, p, d);
          U = (data.y(a) - fitted_a) * std::sqrt(mp) / std::sqrt(S);
        }
        std::optional<FayHerriotFit> fit;
        for (std::size_t k = 0; k < nm; ++k) {
          const IntervalMode mode = cfg.modes[k];
          double center = 0.0, half = 0.0;
          if (balanced && mode != IntervalMode::SMITH_T6) {
            double B = Bd, cut = z;
            double scale = std::sqrt(cfg.V * (1.0 - Bd));
            switch (mode) {
              case IntervalMode::KNOWN_A:
                B = st.B_area;
                scale = std::sqrt(cfg.V * (1.0 - B + B * h(a)));
                break;
              case IntervalMode::CALIBRATED_T4:
                cut = t4_cutoff(z, Bd, m, h(a), d);
                break;
              case IntervalMode::CONDITIONAL_T5:
                cut = t5_cutoff(z, Bd, m, h(a), d, U);
                break;
              default:
                break;
            }
            center = (1.0 - B) * data.y(a) + B * fitted_a;
            half = cut * scale;
          } else {
            if (!fit) fit = estimate_A(data, cfg.fit_method);
            try {
              const Interval iv = mode == IntervalMode::SMITH_T6
                                      ? smith_t6_interval(data, *fit, a, cfg.alpha)
                                      : naive_interval(data, *fit, a, cfg.alpha);
              center = iv.center;
              half = iv.half_width;
            } catch (const Error& e) {
              if (e.code() != ErrorCode::BoundaryEstimate && e.code() != ErrorCode::DegenerateShrinkage) throw;
              ++t.refused[k];
              continue;
            }
          }
          const bool hit = std::fabs(target - center) <= half;
          ++t.total[k];
          if (hit) ++t.hits[k];
          if (nb > 0 && balanced && mode == IntervalMode::NAIVE) {
            const auto it = std::upper_bound(cfg.u_bin_edges.begin(), cfg.u_bin_edges.end(), U);
            if (it != cfg.u_bin_edges.begin() && it != cfg.u_bin_edges.end()) {
              const auto bin = static_cast<std::size_t>(it - cfg.u_bin_edges.begin() - 1);
              ++t.bin_total[bin];
              if (hit) ++t.bin_hits[bin];
              t.bin_pred[bin] += conditional_coverage_expansion(z, st.B_area, m, h(a), d, U).predicted_coverage;
            }
          }
        }
      }
    };

    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nthreads);
    for (unsigned w = 0; w < nthreads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < kChunks; c += nthreads) run_chunk(c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    Tally total(nm, nb);
    for (const auto& c : chunks) total.merge(c);

    for (std::size_t k = 0; k < nm; ++k) {
      const long n = total.total[k];
      const double cov = n > 0 ? static_cast<double>(total.hits[k]) / static_cast<double>(n) : 0.0;
      const double se = n > 0 ? std::sqrt(cov * (1.0 - cov) / static_cast<double>(n)) : 0.0;
      table.rows.push_back({cfg.modes[k], st.B_area, m, n, cov, se, total.refused[k]});
    }
    for (std::size_t b = 0; b < nb; ++b) {
      const long n = total.bin_total[b];
      const double cov = n > 0 ? static_cast<double>(total.bin_hits[b]) / static_cast<double>(n) : 0.0;
      table.conditional.push_back({st.B_area, cfg.u_bin_edges[b], cfg.u_bin_edges[b + 1], n, cov,
                                   n > 0 ? std::sqrt(cov * (1.0 - cov) / static_cast<double>(n)) : 0.0,
                                   n > 0 ? total.bin_pred[b] / static_cast<double>(n) : 0.0});
    }
  }
  return table;
}

}  // namespace sae
