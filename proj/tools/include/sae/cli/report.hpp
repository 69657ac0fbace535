#pragma once

#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace sae::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "sae 0.1.0";

/// Per-area table of numbers plus run metadata. Every value is finite.
struct Report {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> values;  // one row per id
  /// Column whose rounded value is repeated in the display column.
  std::string display_column;

  void set_meta(const std::string& key, const std::string& value);
  const std::string* find_meta(const std::string& key) const;
  void add_column(const std::string& name, const std::vector<double>& column);
  std::size_t column_index(const std::string& name) const;
  double at(std::size_t row, const std::string& column) const;

  bool operator==(const Report& other) const = default;
};

std::string to_csv(const Report& r);
std::string to_json(const Report& r);
std::string render(const Report& r, const std::string& format);

Report parse_report_csv(std::istream& in);
Report parse_report_json(std::istream& in);

}  // namespace sae::cli
