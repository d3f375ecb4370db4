#include "afp/flowdata/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "afp/error.hpp"

namespace afp::flowdata {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r' && c != '\n') {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

bool parse_finite(std::string_view cell, double& out) {
  cell = trim(cell);
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

LoadResult read_csv(std::istream& in, const FeatureSchema& schema,
                    std::string_view label_column) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCategory::schema, "CSV input has no header row");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  const auto header = split_csv_line(line);
  auto column_of = [&header](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    return std::nullopt;
  };

  std::vector<std::size_t> columns;
  columns.reserve(schema.size());
  for (const auto& name : schema.names()) {
    auto c = column_of(name);
    if (!c) throw Error(ErrorCategory::schema, "CSV header lacks column '" + name + "'");
    columns.push_back(*c);
  }
  const auto label_col = column_of(label_column);
  if (!label_col) {
    throw Error(ErrorCategory::schema,
                "CSV header lacks label column '" + std::string(label_column) + "'");
  }

  LoadResult result;
  std::vector<double> values;
  std::vector<Label> labels;
  std::vector<double> row(schema.size());
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    bool ok = fields.size() == header.size();
    for (std::size_t j = 0; ok && j < columns.size(); ++j) {
      ok = parse_finite(fields[columns[j]], row[j]);
    }
    std::string_view label_cell = ok ? trim(fields[*label_col]) : std::string_view{};
    if (ok && label_cell.empty()) ok = false;
    if (!ok) {
      ++result.dropped;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    labels.push_back(iequals(label_cell, "benign") ? Label::benign : Label::attack);
  }
  if (labels.empty()) {
    throw Error(ErrorCategory::empty_dataset,
                "no CSV rows survived missing-value exclusion (dropped " +
                    std::to_string(result.dropped) + ")");
  }
  result.data = Dataset(schema, std::move(values), std::move(labels), Provenance::ingested);
  return result;
}

LoadResult load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                    std::string_view label_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open CSV file " + path.string());
  return read_csv(in, schema, label_column);
}

void write_csv(std::ostream& out, const Dataset& data, std::string_view label_column) {
  const auto& names = data.schema().names();
  for (const auto& n : names) out << n << ',';
  out << label_column << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) out << format_double(v) << ',';
    out << to_string(data.label(i)) << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& data,
               std::string_view label_column) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write CSV file " + path.string());
  write_csv(out, data, label_column);
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

}  // namespace afp::flowdata
