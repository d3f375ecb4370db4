#include "afp/kernels/kernels.hpp"
#include "kernels_internal.hpp"

#include <limits>

namespace afp::kernels::scalar {

void column_sums(const double* data, std::size_t rows, std::size_t cols,
                 double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = data + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
  }
}

void column_sq_dev(const double* data, std::size_t rows, std::size_t cols,
                   const double* center, double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = data + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - center[c];
      out[c] += d * d;
    }
  }
}

void affine_columns(double* data, std::size_t rows, std::size_t cols,
                    const double* shift, const double* scale) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = data + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] = (row[c] - shift[c]) * scale[c];
  }
}

SplitScan max_mean_shift_split(const double* prefix, std::size_t n,
                               std::size_t lo, std::size_t hi,
                               const double* weight, const double* inv_left,
                               const double* inv_right) {
  SplitScan best;
  if (lo > hi || hi >= n) return best;
  const double total = prefix[n];
  for (std::size_t t = lo; t <= hi; ++t) {
    const double a = prefix[t] * inv_left[t];
    const double b = (total - prefix[t]) * inv_right[t];
    const double d = a - b;
    const double s = weight[t] * (d * d);
    if (!best.found() || s > best.score) {
      best.index = t;
      best.score = s;
    }
  }
  return best;
}

SplitScan min_gini_split(const double* values, const double* cum_pos,
                         std::size_t n, std::size_t min_leaf) {
  SplitScan best;
  if (min_leaf == 0) min_leaf = 1;
  if (n < 2 * min_leaf) return best;
  const double total = cum_pos[n - 1];
  const double nd = static_cast<double>(n);
  for (std::size_t i = min_leaf - 1; i + min_leaf < n; ++i) {
    if (!(values[i] < values[i + 1])) continue;
    const double nl = static_cast<double>(i + 1);
    const double nr = nd - nl;
    const double pl = cum_pos[i];
    const double pr = total - pl;
    const double s = (2.0 * pl) * (nl - pl) / nl + (2.0 * pr) * (nr - pr) / nr;
    if (!best.found() || s < best.score) {
      best.index = i;
      best.score = s;
    }
  }
  return best;
}

}  // namespace afp::kernels::scalar
