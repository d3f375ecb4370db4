#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "afp/flowdata/dataset.hpp"

namespace afp::flowdata {

/// Raw standard deviations below this are treated as a constant column.
inline constexpr double kConstantStdGuard = 1e-12;

struct StandardizationParams {
  std::vector<double> mean;
  std::vector<double> std;  ///< population std, 1 for constant columns
};

/// Per-column mean and guarded population std of a row-major block
/// (two-pass: sum, then squared deviations from the mean).
StandardizationParams column_moments(std::span<const double> rows, std::size_t cols);

/// Fits (when `params` is empty) or applies the given transform
/// x -> (x - mean) / std. Returns the transformed data and the params used.
std::pair<Dataset, StandardizationParams> standardize(
    const Dataset& data, const std::optional<StandardizationParams>& params = std::nullopt);

struct Split {
  Dataset train;
  Dataset test;
};

/// Per-class shuffled holdout: round(count * test_fraction) records of each
/// class go to test. Both outputs keep the input's relative order.
Split stratified_split(const Dataset& data, double test_fraction, std::uint64_t seed);

}  // namespace afp::flowdata
