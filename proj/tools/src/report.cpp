#include "sae/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "sae/cli/csv.hpp"
#include "sae/error.hpp"

namespace sae::cli {

void Report::set_meta(const std::string& key, const std::string& value) {
  for (auto& kv : meta) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  meta.emplace_back(key, value);
}

const std::string* Report::find_meta(const std::string& key) const {
  for (const auto& kv : meta) {
    if (kv.first == key) return &kv.second;
  }
  return nullptr;
}

void Report::add_column(const std::string& name, const std::vector<double>& column) {
  if (column.size() != ids.size()) fail(ErrorCode::InvalidArgument, "column '" + name + "' has the wrong length");
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (!std::isfinite(column[i])) {
      fail(ErrorCode::NonConvergence, "column '" + name + "' is not finite for area '" + ids[i] + "'");
    }
  }
  columns.push_back(name);
  if (values.size() != ids.size()) values.assign(ids.size(), {});
  for (std::size_t i = 0; i < column.size(); ++i) values[i].push_back(column[i]);
}

std::size_t Report::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) fail(ErrorCode::InvalidArgument, "report has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double Report::at(std::size_t row, const std::string& column) const {
  return values.at(row).at(column_index(column));
}

std::string to_csv(const Report& r) {
  std::ostringstream out;
  out << "# schema_version=" << kSchemaVersion << '\n';
  for (const auto& [k, v] : r.meta) out << "# " << k << '=' << v << '\n';
  if (!r.display_column.empty()) out << "# display_column=" << r.display_column << '\n';
  out << "area_id";
  for (const auto& c : r.columns) out << ',' << csv_field(c);
  if (!r.display_column.empty()) out << ",display";
  out << '\n';
  const std::size_t d = r.display_column.empty() ? 0 : r.column_index(r.display_column);
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    out << csv_field(r.ids[i]);
    for (const double v : r.values[i]) out << ',' << format_full(v);
    if (!r.display_column.empty()) out << ',' << format_rounded(r.values[i][d]);
    out << '\n';
  }
  return out.str();
}

std::string to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.meta) meta[k] = v;
  j["meta"] = meta;
  j["columns"] = r.columns;
  j["display_column"] = r.display_column;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  const std::size_t d = r.display_column.empty() ? 0 : r.column_index(r.display_column);
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    nlohmann::ordered_json row;
    row["area_id"] = r.ids[i];
    row["values"] = r.values[i];
    if (!r.display_column.empty()) row["display"] = format_rounded(r.values[i][d]);
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::string render(const Report& r, const std::string& format) {
  if (format == "csv") return to_csv(r);
  if (format == "json") return to_json(r);
  fail(ErrorCode::ValidationError, "unknown output format '" + format + "'");
}

Report parse_report_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  Report r;
  for (const auto& [k, v] : t.comments) {
    if (k == "schema_version") {
      if (v != std::to_string(kSchemaVersion)) fail(ErrorCode::ParseError, "unsupported schema_version " + v);
      continue;
    }
    if (k == "display_column") {
      r.display_column = v;
      continue;
    }
    r.meta.emplace_back(k, v);
  }
  if (t.header.empty() || t.header[0] != "area_id") fail(ErrorCode::ParseError, "line 1: expected area_id column");
  std::size_t end = t.header.size();
  const bool has_display = t.header.back() == "display";
  if (has_display) --end;
  r.columns.assign(t.header.begin() + 1, t.header.begin() + static_cast<std::ptrdiff_t>(end));
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    r.ids.push_back(t.rows[k][0]);
    std::vector<double> row;
    for (std::size_t c = 1; c < end; ++c) row.push_back(parse_number(t.rows[k][c], t.lines[k], t.header[c]));
    r.values.push_back(std::move(row));
  }
  return r;
}

Report parse_report_json(std::istream& in) {
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, e.what());
  }
  if (j.value("schema_version", -1) != kSchemaVersion) fail(ErrorCode::ParseError, "unsupported schema_version");
  Report r;
  for (const auto& [k, v] : j.at("meta").items()) r.meta.emplace_back(k, v.get<std::string>());
  r.columns = j.at("columns").get<std::vector<std::string>>();
  r.display_column = j.value("display_column", std::string());
  for (const auto& row : j.at("rows")) {
    r.ids.push_back(row.at("area_id").get<std::string>());
    r.values.push_back(row.at("values").get<std::vector<double>>());
  }
  return r;
}

}  // namespace sae::cli
