#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "adacate/dataset.hpp"

namespace adacate {

// Column mapping for study CSVs. Empty x_columns means "use x1..xp found in
// the header, in numeric order".
struct CsvSchema {
  std::string z_column = "z";
  std::string t_column = "t";
  std::string y_column = "y";
  std::vector<std::string> x_columns;
};

namespace csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  long column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<long>(j);
    return -1;
  }
};

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(trim(std::string_view(line).substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  table.header = split_line(line);
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != table.header.size())
      throw ParseError(path + ": row " + std::to_string(row_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

inline double parse_number(const std::string& cell, const std::string& path,
                           std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError(path + ": row " + std::to_string(row) + ", column '" +
                     column + "': non-numeric cell '" + cell + "'");
  return value;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write(const std::string& path, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << header[j];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
}

}  // namespace csv

namespace detail {

inline std::vector<std::string> resolve_x_columns(const csv::Table& table,
                                                  const CsvSchema& schema,
                                                  const std::string& path) {
  if (!schema.x_columns.empty()) return schema.x_columns;
  // Auto-detect x1..xp: collect columns named x<k> and demand a contiguous run.
  std::vector<std::pair<int, std::string>> found;
  for (const std::string& name : table.header) {
    if (name.size() >= 2 && name[0] == 'x') {
      int k = 0;
      auto [ptr, ec] =
          std::from_chars(name.data() + 1, name.data() + name.size(), k);
      if (ec == std::errc() && ptr == name.data() + name.size() && k >= 1)
        found.emplace_back(k, name);
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> cols;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].first != static_cast<int>(i) + 1)
      throw ParseError(path + ": covariate columns are not contiguous x1..xp");
    cols.push_back(found[i].second);
  }
  if (cols.empty())
    throw ParseError(path + ": no covariate columns x1..xp found");
  return cols;
}

}  // namespace detail

// Reads a study CSV (header row, comma separated, '.' decimal). Errors carry
// the offending row and column.
inline StudyDataset load_csv(const std::string& path,
                             const CsvSchema& schema = CsvSchema{}) {
  csv::Table table = csv::read(path);
  if (table.rows.empty()) throw ParseError(path + ": zero data rows");

  auto require_column = [&](const std::string& name) -> long {
    long j = table.column(name);
    if (j < 0) throw ParseError(path + ": missing column '" + name + "'");
    return j;
  };
  const long zc = require_column(schema.z_column);
  const long tc = require_column(schema.t_column);
  const long yc = require_column(schema.y_column);
  std::vector<std::string> x_names = detail::resolve_x_columns(table, schema, path);
  std::vector<long> xc;
  for (const std::string& name : x_names) xc.push_back(require_column(name));

  std::vector<UnitRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::size_t row_no = i + 2;  // 1-based, after the header
    const auto& cells = table.rows[i];
    UnitRecord r;
    const double z = csv::parse_number(cells[zc], path, row_no, schema.z_column);
    const double t = csv::parse_number(cells[tc], path, row_no, schema.t_column);
    if (z != 0.0 && z != 1.0)
      throw ParseError(path + ": row " + std::to_string(row_no) + ": z=" +
                       cells[zc] + " outside {0,1}");
    if (t != 0.0 && t != 1.0)
      throw ParseError(path + ": row " + std::to_string(row_no) + ": t=" +
                       cells[tc] + " outside {0,1}");
    r.z = static_cast<int>(z);
    r.t = static_cast<int>(t);
    r.y = csv::parse_number(cells[yc], path, row_no, schema.y_column);
    r.x.reserve(xc.size());
    for (std::size_t j = 0; j < xc.size(); ++j)
      r.x.push_back(csv::parse_number(cells[xc[j]], path, row_no, x_names[j]));
    records.push_back(std::move(r));
  }
  try {
    return StudyDataset(std::move(records));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_csv(const std::string& path, const StudyDataset& data) {
  std::vector<std::string> header = {"z", "t", "y"};
  for (std::size_t j = 1; j <= data.dim(); ++j)
    header.push_back("x" + std::to_string(j));
  std::vector<std::vector<std::string>> rows;
  rows.reserve(data.size());
  for (const UnitRecord& r : data.records()) {
    std::vector<std::string> row = {std::to_string(r.z), std::to_string(r.t),
                                    csv::format_number(r.y)};
    for (double x : r.x) row.push_back(csv::format_number(x));
    rows.push_back(std::move(row));
  }
  csv::write(path, header, rows);
}

}  // namespace adacate
