#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "apportion/estimator.hpp"

namespace apportion::io {

/// Shortest-round-trip is not guaranteed by every libstdc++; 17 significant
/// digits always round-trips a double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

struct Table {
  std::vector<std::string> header;
  Matrix values;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Error parse_error(size_t line, size_t column, const std::string& reason) {
  return Error(ErrorCode::ParseError,
               "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + reason);
}

}  // namespace detail

/// Comma-separated table with one header row and a numeric body. Lines and
/// columns in errors are 1-based.
inline Table parse_table(std::istream& in) {
  Table t;
  std::string line;
  size_t lineno = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = detail::split(line);
    if (t.header.empty()) {
      t.header = fields;
      continue;
    }
    if (fields.size() != t.header.size())
      throw detail::parse_error(lineno, std::min(fields.size(), t.header.size()) + 1,
                                "expected " + std::to_string(t.header.size()) + " fields, found " +
                                    std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (first != last && *first == '+') ++first;
      const auto res = std::from_chars(first, last, row[c]);
      if (f.empty() || res.ec != std::errc() || res.ptr != last)
        throw detail::parse_error(lineno, c + 1, "not a number: '" + f + "'");
    }
    rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw Error(ErrorCode::ParseError, "line 1, column 1: missing header row");
  t.values.resize(Index(rows.size()), Index(t.header.size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c) t.values(Index(r), Index(c)) = rows[r][c];
  return t;
}

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return parse_table(in);
}

/// Concentrations from CSV; rejects negative and non-finite entries with the
/// offending (line, column).
inline ConcentrationMatrix parse_concentrations(std::istream& in) {
  Table t = parse_table(in);
  if (t.values.rows() == 0) throw Error(ErrorCode::EmptyData, "no data rows");
  for (Index i = 0; i < t.values.rows(); ++i)
    for (Index j = 0; j < t.values.cols(); ++j) {
      const double v = t.values(i, j);
      const std::string where = "line " + std::to_string(i + 2) + ", column " + std::to_string(j + 1);
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, where + ": non-finite value");
      if (v < 0) throw Error(ErrorCode::NegativeValue, where + ": negative value");
    }
  return {std::move(t.values), std::move(t.header)};
}

inline ConcentrationMatrix load_concentrations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return parse_concentrations(in);
}

inline void write_table(std::ostream& out, const std::vector<std::string>& header, const Matrix& values) {
  for (size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
}

inline void write_table(const std::string& path, const std::vector<std::string>& header, const Matrix& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_table(out, header, values);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

inline std::vector<std::string> numbered(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  for (Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

}  // namespace apportion::io
