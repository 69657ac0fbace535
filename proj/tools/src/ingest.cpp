#include "sae/cli/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sae/error.hpp"

namespace sae::cli {
namespace {

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

std::string where(const CsvTable& t, std::size_t row, std::string_view column) {
  return "line " + std::to_string(t.lines[row]) + ", column '" + std::string(column) + "'";
}

void check_rank(const Matrix& X, const std::vector<std::string>& names) {
  if (X.cols() > 0 && numeric::numerical_rank(X) < X.cols()) {
    fail(ErrorCode::ValidationError, "covariate columns are rank deficient: " + join(names));
  }
}

}  // namespace

std::vector<std::string> covariate_names(const CsvTable& table, const AreaColumns& cols) {
  std::vector<std::string> names;
  if (cols.intercept) names.emplace_back("(intercept)");
  if (!cols.x.empty()) {
    for (const auto& c : cols.x) {
      table.column(c);
      names.push_back(c);
    }
  } else {
    for (const auto& h : table.header) {
      if (h != cols.id && h != cols.y && h != cols.V) names.push_back(h);
    }
  }
  return names;
}

AreaDataset ingest_area_csv(const CsvTable& t, const AreaColumns& cols) {
  const std::size_t c_id = t.column(cols.id), c_y = t.column(cols.y), c_v = t.column(cols.V);
  const std::vector<std::string> names = covariate_names(t, cols);
  std::vector<std::size_t> c_x;
  for (const auto& n : names) {
    if (n != "(intercept)") c_x.push_back(t.column(n));
  }
  const auto m = static_cast<Index>(t.rows.size());
  const Index off = cols.intercept ? 1 : 0;
  Vector y(m), V(m);
  Matrix X(m, off + static_cast<Index>(c_x.size()));
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto i = static_cast<Index>(r);
    ids.push_back(row[c_id]);
    if (!seen.insert(row[c_id]).second) {
      fail(ErrorCode::ValidationError, where(t, r, cols.id) + ": duplicate area id '" + row[c_id] + "'");
    }
    y(i) = parse_number(row[c_y], t.lines[r], cols.y);
    V(i) = parse_number(row[c_v], t.lines[r], cols.V);
    if (!(V(i) > 0.0) || !std::isfinite(V(i))) {
      fail(ErrorCode::ValidationError,
           where(t, r, cols.V) + " (area '" + row[c_id] + "'): sampling variance must be positive");
    }
    if (cols.intercept) X(i, 0) = 1.0;
    for (std::size_t k = 0; k < c_x.size(); ++k) {
      X(i, off + static_cast<Index>(k)) = parse_number(row[c_x[k]], t.lines[r], t.header[c_x[k]]);
    }
  }
  if (m == 0) fail(ErrorCode::ValidationError, "no data rows");
  check_rank(X, names);
  return AreaDataset::make(std::move(y), std::move(X), std::move(V), std::move(ids));
}

AreaDataset ingest_area_csv(std::istream& in, const AreaColumns& cols) {
  return ingest_area_csv(read_csv(in), cols);
}

UnitDataset ingest_unit_csv(const CsvTable& units, const CsvTable& areas, bool intercept) {
  const std::size_t u_id = units.column("area_id"), u_y = units.column("y");
  std::vector<std::size_t> u_x;
  std::vector<std::string> names;
  if (intercept) names.emplace_back("(intercept)");
  for (std::size_t c = 0; c < units.header.size(); ++c) {
    if (c != u_id && c != u_y) {
      u_x.push_back(c);
      names.push_back(units.header[c]);
    }
  }
  const std::size_t a_id = areas.column("area_id"), a_n = areas.column("N");
  std::vector<std::size_t> a_x;
  for (std::size_t c = 0; c < areas.header.size(); ++c) {
    if (c != a_id && c != a_n) a_x.push_back(c);
  }
  if (a_x.size() != u_x.size()) {
    fail(ErrorCode::ValidationError, "area file has " + std::to_string(a_x.size()) +
                                         " covariate means, unit file has " +
                                         std::to_string(u_x.size()) + " covariates");
  }
  const Index off = intercept ? 1 : 0;
  const auto p = off + static_cast<Index>(u_x.size());

  const auto n = static_cast<Index>(units.rows.size());
  std::vector<std::string> unit_area;
  Vector y(n);
  Matrix X(n, p);
  for (std::size_t r = 0; r < units.rows.size(); ++r) {
    const auto& row = units.rows[r];
    const auto j = static_cast<Index>(r);
    unit_area.push_back(row[u_id]);
    y(j) = parse_number(row[u_y], units.lines[r], "y");
    if (intercept) X(j, 0) = 1.0;
    for (std::size_t k = 0; k < u_x.size(); ++k) {
      X(j, off + static_cast<Index>(k)) = parse_number(row[u_x[k]], units.lines[r], units.header[u_x[k]]);
    }
  }

  const auto m = static_cast<Index>(areas.rows.size());
  std::vector<std::string> ids;
  Vector N(m);
  Matrix Xbar(m, p);
  for (std::size_t r = 0; r < areas.rows.size(); ++r) {
    const auto& row = areas.rows[r];
    const auto i = static_cast<Index>(r);
    ids.push_back(row[a_id]);
    N(i) = parse_number(row[a_n], areas.lines[r], "N");
    if (!(N(i) >= 1.0)) fail(ErrorCode::ValidationError, where(areas, r, "N") + ": N must be >= 1");
    if (intercept) Xbar(i, 0) = 1.0;
    for (std::size_t k = 0; k < a_x.size(); ++k) {
      Xbar(i, off + static_cast<Index>(k)) = parse_number(row[a_x[k]], areas.lines[r], areas.header[a_x[k]]);
    }
  }
  check_rank(X, names);
  return UnitDataset::make(unit_area, y, X, std::move(ids), N, Xbar);
}

SymmetricMatrix ingest_covariance_csv(const CsvTable& t, Index m) {
  if (static_cast<Index>(t.header.size()) != m || static_cast<Index>(t.rows.size()) != m) {
    fail(ErrorCode::ValidationError, "covariance file must be " + std::to_string(m) + " x " +
                                         std::to_string(m));
  }
  Matrix V(m, m);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      V(static_cast<Index>(r), static_cast<Index>(c)) = parse_number(t.rows[r][c], t.lines[r], t.header[c]);
    }
  }
  const double scale = V.cwiseAbs().maxCoeff();
  if (!((V - V.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale)) {
    fail(ErrorCode::ValidationError, "covariance matrix is not symmetric");
  }
  return SymmetricMatrix::from_dense(V);
}

}  // namespace sae::cli
