#include <cmath>
#include <random>
#include <span>

#include <benchmark/benchmark.h>

#include "sae/fay_herriot.hpp"
#include "sae/hb.hpp"
#include "sae/numeric/quadrature.hpp"
#include "sae/unit_level.hpp"

using namespace sae;

namespace {

AreaDataset synthetic_area(Index m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Matrix X(m, 2);
  Vector y(m), V(m);
  for (Index i = 0; i < m; ++i) {
    X.row(i) << 1.0, z(rng);
    V(i) = u(rng);
    y(i) = 1.0 + 0.5 * X(i, 1) + z(rng) + std::sqrt(V(i)) * z(rng);
  }
  return AreaDataset::make(y, X, V);
}

UnitDataset synthetic_units(Index m, Index ni, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const Index n = m * ni;
  Matrix X(n, 2), Xbar(m, 2);
  Vector y(n);
  for (Index i = 0; i < m; ++i) {
    const double v = z(rng);
    for (Index j = 0; j < ni; ++j) {
      X.row(i * ni + j) << 1.0, z(rng);
      y(i * ni + j) = 1.0 + 0.7 * X(i * ni + j, 1) + v + 1.4 * z(rng);
    }
    Xbar.row(i) = X.middleRows(i * ni, ni).colwise().mean();
  }
  return UnitDataset::from_grouped(std::vector<Index>(static_cast<std::size_t>(m), ni), y, X,
                                   Vector::Constant(m, 10.0 * static_cast<double>(ni)), Xbar);
}

void BM_HalflineQuadrature(benchmark::State& state) {
  const numeric::VectorIntegrand f = [](double x, std::span<double> out) {
    const double d = std::pow(1.0 + x, -3.5);
    out[0] = d;
    out[1] = x * d;
  };
  for (auto _ : state) {
    const auto rule = numeric::adaptive_rule_halfline(f, 2, 1.0, {});
    benchmark::DoNotOptimize(rule.nodes.data());
  }
}
BENCHMARK(BM_HalflineQuadrature);

void BM_EstimateA(benchmark::State& state) {
  const AreaDataset d = synthetic_area(state.range(0), 1);
  const auto method = static_cast<VarianceMethod>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_A(d, method).A_hat);
  state.SetLabel(std::string(to_string(method)));
}
BENCHMARK(BM_EstimateA)
    ->ArgsProduct({{15, 100, 1000},
                   {static_cast<long>(VarianceMethod::FH_MOMENT), static_cast<long>(VarianceMethod::PR_ANOVA),
                    static_cast<long>(VarianceMethod::ML), static_cast<long>(VarianceMethod::REML)}});

void BM_HbPosterior(benchmark::State& state) {
  const AreaDataset d = synthetic_area(state.range(0), 2);
  for (auto _ : state) {
    const HbPosterior post = posterior_A(d);
    benchmark::DoNotOptimize(hb_estimate(d, post).theta.data());
  }
}
BENCHMARK(BM_HbPosterior)->Arg(15)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_UnitHb(benchmark::State& state) {
  const UnitDataset d = synthetic_units(state.range(0), 5, 3);
  UnitHbPrior prior;
  for (auto _ : state) benchmark::DoNotOptimize(unit_hb(d, prior).gamma.data());
}
BENCHMARK(BM_UnitHb)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
