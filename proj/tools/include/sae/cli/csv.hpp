#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace sae::cli {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row
  /// `# key=value` lines before the header, in order.
  std::vector<std::pair<std::string, std::string>> comments;

  /// Column position by name; throws ValidationError when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// Comma-separated, first non-comment line is the header. Double quotes may
/// wrap a field; blank lines are skipped. Throws ParseError with the line number.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Parses a decimal number; the message names the line and column on failure.
double parse_number(std::string_view text, std::size_t line, std::string_view column);

/// Shortest representation that reads back to the same double ('.' decimal point).
std::string format_full(double x);
/// Rounded to `digits` significant digits.
std::string format_rounded(double x, int digits = 6);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);

}  // namespace sae::cli
