#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "afp/flowdata/dataset.hpp"

namespace afp::flowdata {

struct LoadResult {
  Dataset data;
  std::size_t dropped = 0;  ///< rows with a missing or non-numeric schema cell
};

/// Reads a comma-separated flow table with a header row. Columns not named in
/// the schema are ignored. Label value "Benign" (any case) maps to benign and
/// every other non-empty value to attack. Rows with a missing, non-numeric or
/// non-finite value in any schema column (or an empty label) are dropped.
///
/// Throws Error{schema} when a schema column or the label column is absent,
/// Error{empty_dataset} when no row survives, Error{io} when unreadable.
LoadResult load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                    std::string_view label_column = "Label");

LoadResult read_csv(std::istream& in, const FeatureSchema& schema,
                    std::string_view label_column = "Label");

/// Writes `data` with the schema header plus `label_column` ("Benign"/"Attack").
/// Values use round-trip precision.
void write_csv(std::ostream& out, const Dataset& data,
               std::string_view label_column = "Label");
void write_csv(const std::filesystem::path& path, const Dataset& data,
               std::string_view label_column = "Label");

/// Splits one CSV line into fields. Double-quoted fields may contain commas;
/// a doubled quote inside a quoted field is a literal quote.
std::vector<std::string> split_csv_line(std::string_view line);

/// Parses a whole cell (surrounding whitespace allowed) as a finite double.
bool parse_finite(std::string_view cell, double& out);

}  // namespace afp::flowdata
