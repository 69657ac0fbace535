#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sae/area_data.hpp"

#ifndef SAE_DATA_DIR
#define SAE_DATA_DIR "data"
#endif

namespace fixture {

/// Fifteen-state income data with intercept prepended. `corrected` replaces
/// the AR covariate by the value that reproduces the published estimates.
inline sae::AreaDataset seinc15(bool corrected = true) {
  std::ifstream in(std::string(SAE_DATA_DIR) + "/seinc15.csv");
  if (!in) throw std::runtime_error("missing seinc15.csv");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> ids;
  std::vector<double> y, x, v;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, a, b, c;
    std::getline(ss, id, ',');
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    ids.push_back(id);
    y.push_back(std::stod(a));
    x.push_back(std::stod(b));
    v.push_back(std::stod(c));
    if (corrected && id == "AR") x.back() = 20124.0;
  }
  const auto m = static_cast<Eigen::Index>(y.size());
  sae::Matrix X(m, 2);
  sae::Vector Y(m), V(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = x[static_cast<std::size_t>(i)];
    Y(i) = y[static_cast<std::size_t>(i)];
    V(i) = v[static_cast<std::size_t>(i)];
  }
  return sae::AreaDataset::make(Y, X, V, ids);
}

inline sae::Index index_of(const sae::AreaDataset& d, const std::string& id) {
  for (std::size_t i = 0; i < d.area_ids.size(); ++i)
    if (d.area_ids[i] == id) return static_cast<sae::Index>(i);
  throw std::runtime_error("no area " + id);
}

}  // namespace fixture
