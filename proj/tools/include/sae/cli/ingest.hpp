#pragma once

#include <istream>
#include <string>
#include <vector>

#include "sae/area_data.hpp"
#include "sae/cli/csv.hpp"
#include "sae/unit_level.hpp"

namespace sae::cli {

struct AreaColumns {
  std::string id = "area_id";
  std::string y = "y";
  std::string V = "V";
  /// Covariate columns; empty takes every column other than id, y and V.
  std::vector<std::string> x;
  bool intercept = true;
};

/// Validated area dataset. V must be strictly positive; covariates must have
/// full column rank once the intercept is prepended.
AreaDataset ingest_area_csv(const CsvTable& table, const AreaColumns& cols = {});
AreaDataset ingest_area_csv(std::istream& in, const AreaColumns& cols = {});

/// Unit file: area_id, y, x1..xp. Area file: area_id, N, then p population
/// covariate means in the same order as the unit covariates.
UnitDataset ingest_unit_csv(const CsvTable& units, const CsvTable& areas, bool intercept = true);

/// Square matrix of sampling covariances, one header label per area.
SymmetricMatrix ingest_covariance_csv(const CsvTable& table, Index m);

/// Names of the covariate columns used, intercept first when added.
std::vector<std::string> covariate_names(const CsvTable& table, const AreaColumns& cols);

}  // namespace sae::cli
