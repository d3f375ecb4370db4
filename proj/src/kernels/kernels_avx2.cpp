// AVX2 variants. Compiled with -mavx2 only (no FMA, no contraction) so every
// lane performs the same IEEE operations in the same order as the scalar
// reference; results are bitwise identical, which keeps reports independent
// of the host ISA.

#include "afp/kernels/kernels.hpp"
#include "kernels_internal.hpp"

#include <immintrin.h>

#include <array>
#include <limits>

namespace afp::kernels::avx2 {
namespace {

inline __m256i tail_mask(std::size_t width) {
  alignas(32) static constexpr std::array<long long, 8> bits = {-1, -1, -1, -1,
                                                                0,  0,  0,  0};
  return _mm256_loadu_si256(
      reinterpret_cast<const __m256i*>(bits.data() + 4 - width));
}

}  // namespace

void column_sums(const double* data, std::size_t rows, std::size_t cols,
                 double* out) {
  for (std::size_t c0 = 0; c0 < cols; c0 += 4) {
    const std::size_t width = (cols - c0 < 4) ? cols - c0 : 4;
    const __m256i mask = tail_mask(width);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t r = 0; r < rows; ++r) {
      acc = _mm256_add_pd(acc, _mm256_maskload_pd(data + r * cols + c0, mask));
    }
    _mm256_maskstore_pd(out + c0, mask, acc);
  }
}

void column_sq_dev(const double* data, std::size_t rows, std::size_t cols,
                   const double* center, double* out) {
  for (std::size_t c0 = 0; c0 < cols; c0 += 4) {
    const std::size_t width = (cols - c0 < 4) ? cols - c0 : 4;
    const __m256i mask = tail_mask(width);
    const __m256d ctr = _mm256_maskload_pd(center + c0, mask);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t r = 0; r < rows; ++r) {
      const __m256d d =
          _mm256_sub_pd(_mm256_maskload_pd(data + r * cols + c0, mask), ctr);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    _mm256_maskstore_pd(out + c0, mask, acc);
  }
}

void affine_columns(double* data, std::size_t rows, std::size_t cols,
                    const double* shift, const double* scale) {
  for (std::size_t c0 = 0; c0 < cols; c0 += 4) {
    const std::size_t width = (cols - c0 < 4) ? cols - c0 : 4;
    const __m256i mask = tail_mask(width);
    const __m256d sh = _mm256_maskload_pd(shift + c0, mask);
    const __m256d sc = _mm256_maskload_pd(scale + c0, mask);
    for (std::size_t r = 0; r < rows; ++r) {
      double* p = data + r * cols + c0;
      const __m256d v = _mm256_maskload_pd(p, mask);
      _mm256_maskstore_pd(p, mask, _mm256_mul_pd(_mm256_sub_pd(v, sh), sc));
    }
  }
}

SplitScan max_mean_shift_split(const double* prefix, std::size_t n,
                               std::size_t lo, std::size_t hi,
                               const double* weight, const double* inv_left,
                               const double* inv_right) {
  SplitScan best;
  if (lo > hi || hi >= n) return best;
  const double total = prefix[n];
  const __m256d vtotal = _mm256_set1_pd(total);
  __m256d best_score = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  __m256d best_idx = _mm256_set1_pd(-1.0);
  __m256d idx = _mm256_setr_pd(static_cast<double>(lo), static_cast<double>(lo + 1),
                               static_cast<double>(lo + 2), static_cast<double>(lo + 3));
  const __m256d four = _mm256_set1_pd(4.0);

  std::size_t t = lo;
  for (; t + 3 <= hi; t += 4) {
    const __m256d p = _mm256_loadu_pd(prefix + t);
    const __m256d a = _mm256_mul_pd(p, _mm256_loadu_pd(inv_left + t));
    const __m256d b =
        _mm256_mul_pd(_mm256_sub_pd(vtotal, p), _mm256_loadu_pd(inv_right + t));
    const __m256d d = _mm256_sub_pd(a, b);
    const __m256d s = _mm256_mul_pd(_mm256_loadu_pd(weight + t), _mm256_mul_pd(d, d));
    const __m256d better = _mm256_cmp_pd(s, best_score, _CMP_GT_OQ);
    best_score = _mm256_blendv_pd(best_score, s, better);
    best_idx = _mm256_blendv_pd(best_idx, idx, better);
    idx = _mm256_add_pd(idx, four);
  }

  alignas(32) double scores[4];
  alignas(32) double indices[4];
  _mm256_store_pd(scores, best_score);
  _mm256_store_pd(indices, best_idx);
  for (int lane = 0; lane < 4; ++lane) {
    if (indices[lane] < 0.0) continue;
    const auto i = static_cast<std::size_t>(indices[lane]);
    if (!best.found() || scores[lane] > best.score ||
        (scores[lane] == best.score && i < best.index)) {
      best.index = i;
      best.score = scores[lane];
    }
  }
  for (; t <= hi; ++t) {
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
  const std::size_t first = min_leaf - 1;
  const std::size_t last = n - min_leaf - 1;  // inclusive

  const __m256d vtotal = _mm256_set1_pd(total);
  const __m256d vn = _mm256_set1_pd(nd);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d four = _mm256_set1_pd(4.0);
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  __m256d best_score = inf;
  __m256d best_idx = _mm256_set1_pd(-1.0);
  __m256d idx = _mm256_setr_pd(static_cast<double>(first), static_cast<double>(first + 1),
                               static_cast<double>(first + 2), static_cast<double>(first + 3));

  std::size_t i = first;
  for (; i + 3 <= last; i += 4) {
    const __m256d v0 = _mm256_loadu_pd(values + i);
    const __m256d v1 = _mm256_loadu_pd(values + i + 1);
    const __m256d admissible = _mm256_cmp_pd(v0, v1, _CMP_LT_OQ);
    const __m256d nl = _mm256_add_pd(idx, one);
    const __m256d nr = _mm256_sub_pd(vn, nl);
    const __m256d pl = _mm256_loadu_pd(cum_pos + i);
    const __m256d pr = _mm256_sub_pd(vtotal, pl);
    const __m256d gl =
        _mm256_div_pd(_mm256_mul_pd(_mm256_mul_pd(two, pl), _mm256_sub_pd(nl, pl)), nl);
    const __m256d gr =
        _mm256_div_pd(_mm256_mul_pd(_mm256_mul_pd(two, pr), _mm256_sub_pd(nr, pr)), nr);
    const __m256d s = _mm256_blendv_pd(inf, _mm256_add_pd(gl, gr), admissible);
    const __m256d better = _mm256_cmp_pd(s, best_score, _CMP_LT_OQ);
    best_score = _mm256_blendv_pd(best_score, s, better);
    best_idx = _mm256_blendv_pd(best_idx, idx, better);
    idx = _mm256_add_pd(idx, four);
  }

  alignas(32) double scores[4];
  alignas(32) double indices[4];
  _mm256_store_pd(scores, best_score);
  _mm256_store_pd(indices, best_idx);
  for (int lane = 0; lane < 4; ++lane) {
    if (indices[lane] < 0.0) continue;
    const auto k = static_cast<std::size_t>(indices[lane]);
    if (!best.found() || scores[lane] < best.score ||
        (scores[lane] == best.score && k < best.index)) {
      best.index = k;
      best.score = scores[lane];
    }
  }
  for (; i <= last; ++i) {
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

}  // namespace afp::kernels::avx2
