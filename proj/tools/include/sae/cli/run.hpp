#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sae/area_data.hpp"
#include "sae/cli/report.hpp"
#include "sae/coverage.hpp"
#include "sae/intervals.hpp"
#include "sae/unit_level.hpp"

namespace sae::cli {

struct RunConfig {
  std::string model = "area";  // area | area-general-v | unit
  std::string method = "REML";
  std::vector<std::string> measures;  // subset of PR, MORRIS, HB
  double alpha = 0.05;
  std::optional<IntervalMode> interval_mode;
  double quadrature_tol = 1e-9;
  std::uint64_t seed = 20090101;
  std::string output_format = "csv";

  /// Throws ValidationError for an unknown model, measure or format, or alpha outside (0, 1).
  void validate() const;
  bool wants(const std::string& measure) const;
};

/// Parses a comma-separated measure list ("PR,MORRIS,HB"), case-insensitive.
std::vector<std::string> parse_measures(const std::string& text);

/// Fay-Herriot fit with the requested measures side by side.
Report run_fit(const RunConfig& config, const AreaDataset& data);
/// Sampling covariance V in place of the diagonal; measures PR and HB.
Report run_general_v_fit(const RunConfig& config, const GeneralVModel& model,
                         const std::vector<std::string>& ids);
/// Nested-error fit: BLUP of area and finite-population means, second-order
/// MSE (PR) and the HB predictor (HB).
Report run_unit_fit(const RunConfig& config, const UnitDataset& data);
/// Interval bounds for every area under config.interval_mode.
Report run_intervals(const RunConfig& config, const AreaDataset& data);

/// Coverage CSV (mode,B,m,reps,coverage,se).
std::string run_coverage(const CoverageConfig& config);

}  // namespace sae::cli
