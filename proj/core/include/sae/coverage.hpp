#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sae/intervals.hpp"

namespace sae {

struct CoverageConfig {
  Index m = 30;
  /// Design; empty means intercept only.
  Matrix X;
  /// Common sampling variance for the balanced design.
  double V = 1.0;
  /// True shrinkage values (balanced); A = V (1 - B) / B.
  std::vector<double> B_values;
  /// Alternative unbalanced setup: true A values with per-area V_pattern.
  std::vector<double> A_values;
  Vector V_pattern;
  double alpha = 0.05;
  std::vector<IntervalMode> modes;
  long reps = 100000;
  std::uint64_t seed = 20090101;
  Index area = 0;
  std::optional<Index> d;
  VarianceMethod fit_method = VarianceMethod::REML;
  unsigned threads = 0;  // 0: hardware concurrency
  /// Edges of U bins for conditional tallies of the NAIVE interval.
  std::vector<double> u_bin_edges;
};

struct CoverageRow {
  IntervalMode mode;
  double B;  // true B of the tallied area
  Index m;
  long reps;  // intervals constructed
  double coverage;
  double se;
  long refused;
};

struct ConditionalRow {
  double B;
  double u_lo;
  double u_hi;
  long reps;
  double coverage;
  double se;
  double predicted;  // mean conditional-expansion prediction at t = z over the bin
};

struct CoverageTable {
  std::vector<CoverageRow> rows;
  std::vector<ConditionalRow> conditional;

  /// Columns mode,B,m,reps,coverage,se.
  std::string to_csv() const;
};

/// Monte Carlo coverage of the intervals for one area. Every replicate uses
/// its own stream derived from (seed, setting, replicate), and tallies are
/// integers, so results do not depend on the thread count.
CoverageTable coverage_simulator(const CoverageConfig& config);

}  // namespace sae
