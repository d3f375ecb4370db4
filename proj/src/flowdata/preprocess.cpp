#include "afp/flowdata/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "afp/error.hpp"
#include "afp/kernels/kernels.hpp"

namespace afp::flowdata {

StandardizationParams column_moments(std::span<const double> rows, std::size_t cols) {
  StandardizationParams p;
  p.mean.assign(cols, 0.0);
  p.std.assign(cols, 1.0);
  const std::size_t n = cols ? rows.size() / cols : 0;
  if (n == 0) return p;
  kernels::column_sums(rows, cols, p.mean);
  for (double& m : p.mean) m /= static_cast<double>(n);
  std::vector<double> ss(cols);
  kernels::column_sq_dev(rows, cols, p.mean, ss);
  for (std::size_t c = 0; c < cols; ++c) {
    const double sd = std::sqrt(ss[c] / static_cast<double>(n));
    p.std[c] = sd < kConstantStdGuard ? 1.0 : sd;
  }
  return p;
}

std::pair<Dataset, StandardizationParams> standardize(
    const Dataset& data, const std::optional<StandardizationParams>& params) {
  if (data.empty()) {
    throw Error(ErrorCategory::empty_dataset, "cannot standardize an empty dataset");
  }
  const std::size_t d = data.dims();
  StandardizationParams p = params ? *params : column_moments(data.values(), d);
  if (p.mean.size() != d || p.std.size() != d) {
    throw Error(ErrorCategory::schema, "standardization params do not match schema length");
  }
  std::vector<double> scale(d);
  for (std::size_t c = 0; c < d; ++c) {
    if (!(p.std[c] > 0.0)) {
      throw Error(ErrorCategory::input, "standardization std must be positive");
    }
    scale[c] = 1.0 / p.std[c];
  }
  std::vector<double> values(data.values().begin(), data.values().end());
  kernels::affine_columns(values, d, p.mean, scale);
  return {Dataset(data.schema(), std::move(values), data.labels(), data.provenance()),
          std::move(p)};
}

Split stratified_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCategory::config, "test_fraction must lie in (0,1)");
  }
  if (!data.has_both_classes()) {
    throw Error(ErrorCategory::stratification,
                "stratified split needs both benign and attack records");
  }
  std::mt19937_64 rng(seed);
  std::vector<char> in_test(data.size(), 0);
  for (Label cls : {Label::benign, Label::attack}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.label(i) == cls) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto take = static_cast<std::size_t>(
        std::llround(static_cast<double>(idx.size()) * test_fraction));
    for (std::size_t k = 0; k < take && k < idx.size(); ++k) in_test[idx[k]] = 1;
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (in_test[i] ? test_idx : train_idx).push_back(i);
  }
  return {data.subset(train_idx), data.subset(test_idx)};
}

}  // namespace afp::flowdata
