#pragma once

// Minimal comma-separated tables: one header row, no quoting.

#include <string>
#include <string_view>
#include <vector>

namespace nonstat {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position of `name`; FormatError naming the key if absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Every row must have as many cells as the header (TruncationError
/// otherwise). Blank lines are skipped.
CsvTable parse_csv(const std::string& text);

/// Full-string decimal parse; FormatError mentioning `context` on failure.
double parse_number(std::string_view s, const std::string& context);

/// Joins already formatted cells with commas and a trailing newline.
std::string csv_row(const std::vector<std::string>& cells);

} // namespace nonstat
