#include "nonstat/csv.hpp"

#include "nonstat/errors.hpp"

#include <charconv>
#include <sstream>

namespace nonstat {

namespace {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return cells;
}

} // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name)
      return c;
  throw FormatError(name, "missing CSV column");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return parse_number(rows.at(row)[column(name)], "column " + name + ", row " + std::to_string(row + 1));
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto cells = split(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw TruncationError("CSV row " + std::to_string(table.rows.size() + 1) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (!have_header)
    throw FormatError("header", "empty CSV");
  return table;
}

double parse_number(std::string_view s, const std::string& context) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError(context, "cannot parse number '" + std::string(s) + "'");
  return v;
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (c)
      out += ',';
    out += cells[c];
  }
  out += '\n';
  return out;
}

} // namespace nonstat
