#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sae/cli/csv.hpp"
#include "sae/cli/ingest.hpp"
#include "sae/cli/reproduce.hpp"
#include "sae/cli/run.hpp"
#include "sae/error.hpp"

#ifndef SAE_DATA_DIR
#define SAE_DATA_DIR "data"
#endif

namespace {

using namespace sae;
using namespace sae::cli;

CsvTable read_input(const std::string& path) {
  if (path == "-") return read_csv(std::cin);
  return read_csv_file(path);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::ValidationError, "cannot write '" + path + "'");
  out << text;
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::NonConvergence:
    case ErrorCode::NoBracket:
      return 3;
    default:
      return 2;
  }
}

struct Common {
  std::string method;
  std::string measures;
  std::string interval_mode;
  std::string output;
  RunConfig config;
  bool no_intercept = false;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_method) {
  c.method = default_method;
  cmd->add_option("--method", c.method, "Variance estimator")->capture_default_str();
  cmd->add_option("--measures", c.measures, "Comma-separated subset of PR,MORRIS,HB");
  cmd->add_option("--alpha", c.config.alpha, "Interval level is 1 - alpha")->capture_default_str();
  cmd->add_option("--tol", c.config.quadrature_tol, "Relative quadrature tolerance")->capture_default_str();
  cmd->add_option("--seed", c.config.seed, "Seed recorded with the run")->capture_default_str();
  cmd->add_option("--format", c.config.output_format, "csv or json")->capture_default_str();
  cmd->add_option("-o,--output", c.output, "Output file (default stdout)");
  cmd->add_flag("--no-intercept", c.no_intercept, "Do not prepend an intercept column");
}

RunConfig finish(Common& c) {
  RunConfig cfg = c.config;
  cfg.method = c.method;
  cfg.measures = parse_measures(c.measures);
  if (!c.interval_mode.empty()) cfg.interval_mode = parse_interval_mode(c.interval_mode);
  cfg.validate();
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-area estimation: Fay-Herriot and nested-error models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // fit
  Common fit;
  std::string fit_data = "-", fit_cov, fit_model = "area";
  auto* fit_cmd = app.add_subcommand("fit", "Area-level fit with uncertainty measures");
  fit_cmd->add_option("data", fit_data, "Area CSV (area_id,y,V,covariates); '-' for stdin");
  fit_cmd->add_option("--model", fit_model, "area or area-general-v")->capture_default_str();
  fit_cmd->add_option("--covariance", fit_cov, "m x m sampling covariance CSV (area-general-v)");
  fit_cmd->add_option("--interval-mode", fit.interval_mode, "Add intervals: naive, t4, t5, smith");
  add_common(fit_cmd, fit, "REML");

  // unit-fit
  Common unit;
  std::string unit_file, area_file;
  auto* unit_cmd = app.add_subcommand("unit-fit", "Nested-error regression on unit-level data");
  unit_cmd->add_option("units", unit_file, "Unit CSV (area_id,y,covariates)")->required();
  unit_cmd->add_option("areas", area_file, "Area CSV (area_id,N,covariate means)")->required();
  add_common(unit_cmd, unit, "REML");
  unit.config.model = "unit";

  // intervals
  Common iv;
  std::string iv_data = "-";
  auto* iv_cmd = app.add_subcommand("intervals", "Empirical Bayes confidence intervals");
  iv_cmd->add_option("data", iv_data, "Area CSV; '-' for stdin");
  iv.interval_mode = "t4";
  iv_cmd->add_option("--interval-mode", iv.interval_mode, "naive, t4, t5 or smith")->capture_default_str();
  add_common(iv_cmd, iv, "REML");

  // coverage
  CoverageConfig cov;
  std::string cov_B = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", cov_modes = "known,naive,t4", cov_out;
  std::string cov_method = "REML";
  auto* cov_cmd = app.add_subcommand("coverage", "Monte Carlo coverage of interval procedures");
  cov_cmd->add_option("--m", cov.m, "Number of areas")->capture_default_str();
  cov_cmd->add_option("--B", cov_B, "True shrinkage values")->capture_default_str();
  cov_cmd->add_option("--V", cov.V, "Common sampling variance")->capture_default_str();
  cov_cmd->add_option("--interval-mode", cov_modes, "Comma-separated interval modes")->capture_default_str();
  cov_cmd->add_option("--alpha", cov.alpha)->capture_default_str();
  cov_cmd->add_option("--reps", cov.reps)->capture_default_str();
  cov_cmd->add_option("--seed", cov.seed)->capture_default_str();
  cov_cmd->add_option("--threads", cov.threads, "0 uses every core")->capture_default_str();
  cov_cmd->add_option("--method", cov_method, "Estimator of A for the Smith interval")->capture_default_str();
  cov_cmd->add_option("-o,--output", cov_out);

  // reproduce
  std::string rep_data = std::string(SAE_DATA_DIR) + "/seinc15.csv", rep_out, rep_fixture = "both";
  double rep_tol = 1e-9;
  auto* rep_cmd = app.add_subcommand("reproduce", "Recompute the 15-state income tables and report deviations");
  rep_cmd->add_option("data", rep_data, "Fixture CSV")->capture_default_str();
  rep_cmd->add_option("--fixture", rep_fixture, "printed, corrected or both")->capture_default_str();
  rep_cmd->add_option("--tol", rep_tol, "Relative quadrature tolerance")->capture_default_str();
  rep_cmd->add_option("-o,--output", rep_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit_cmd) {
      fit.config.model = fit_model;
      const RunConfig cfg = finish(fit);
      AreaColumns cols;
      cols.intercept = !fit.no_intercept;
      const CsvTable table = read_input(fit_data);
      const AreaDataset data = ingest_area_csv(table, cols);
      Report r;
      if (cfg.model == "area-general-v") {
        if (fit_cov.empty()) fail(ErrorCode::ValidationError, "--covariance is required for area-general-v");
        const GeneralVModel model{data.y, data.X, ingest_covariance_csv(read_csv_file(fit_cov), data.m())};
        r = run_general_v_fit(cfg, model, data.area_ids);
      } else {
        r = run_fit(cfg, data);
      }
      write_output(fit.output, render(r, cfg.output_format));
    } else if (*unit_cmd) {
      const RunConfig cfg = finish(unit);
      const UnitDataset data = ingest_unit_csv(read_csv_file(unit_file), read_csv_file(area_file), !unit.no_intercept);
      write_output(unit.output, render(run_unit_fit(cfg, data), cfg.output_format));
    } else if (*iv_cmd) {
      const RunConfig cfg = finish(iv);
      AreaColumns cols;
      cols.intercept = !iv.no_intercept;
      const AreaDataset data = ingest_area_csv(read_input(iv_data), cols);
      write_output(iv.output, render(run_intervals(cfg, data), cfg.output_format));
    } else if (*cov_cmd) {
      for (const auto& b : split_list(cov_B)) cov.B_values.push_back(parse_number(b, 0, "--B"));
      for (const auto& m : split_list(cov_modes)) cov.modes.push_back(parse_interval_mode(m));
      cov.fit_method = parse_variance_method(cov_method);
      write_output(cov_out, run_coverage(cov));
    } else if (*rep_cmd) {
      const AreaDataset printed = ingest_area_csv(read_csv_file(rep_data));
      std::string text;
      if (rep_fixture == "printed" || rep_fixture == "both") {
        text += run_reproduction(printed, "printed", rep_tol).to_csv();
      }
      if (rep_fixture == "corrected" || rep_fixture == "both") {
        text += run_reproduction(with_ar_correction(printed), "corrected-AR", rep_tol).to_csv();
      }
      if (text.empty()) fail(ErrorCode::ValidationError, "unknown fixture '" + rep_fixture + "'");
      write_output(rep_out, text);
    }
  } catch (const Error& e) {
    std::cerr << "sae: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "sae: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
