#pragma once

// Data-parallel inner loops shared by the flow pipeline.
//
// Every kernel has a scalar reference implementation and, on x86-64 builds
// with AFP_ENABLE_AVX2, an AVX2 variant. The active table is chosen once at
// startup from CPUID; AFP_SIMD=scalar in the environment forces the reference
// path. The equivalence tests in tests/unit/test_kernels.cpp hold the two
// variants together.

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>

namespace afp::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

/// Best candidate returned by the split scans. `index` is npos when no
/// candidate satisfied the constraints.
struct SplitScan {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t index = npos;
  double score = 0.0;

  bool found() const noexcept { return index != npos; }
};

struct KernelTable {
  Isa isa;

  /// Per-column sums of a row-major `rows x cols` block.
  void (*column_sums)(const double* data, std::size_t rows, std::size_t cols,
                      double* out);

  /// Per-column sum of squared deviations from `center`.
  void (*column_sq_dev)(const double* data, std::size_t rows, std::size_t cols,
                        const double* center, double* out);

  /// In place x <- (x - shift[c]) * scale[c].
  void (*affine_columns)(double* data, std::size_t rows, std::size_t cols,
                         const double* shift, const double* scale);

  /// Mean-shift split scan over a window of length n given prefix sums
  /// prefix[0..n] (prefix[0] == 0). For each split t in [lo, hi] the score is
  /// weight[t] * (prefix[t] * inv_left[t] - (prefix[n]-prefix[t]) * inv_right[t])^2,
  /// i.e. the L2 cost reduction of fitting two constant segments instead of
  /// one. Returns the first maximiser.
  SplitScan (*max_mean_shift_split)(const double* prefix, std::size_t n,
                                    std::size_t lo, std::size_t hi,
                                    const double* weight,
                                    const double* inv_left,
                                    const double* inv_right);

  /// Gini split scan over n samples sorted by feature value. cum_pos[i] holds
  /// the number of attack labels among samples 0..i. A split after position i
  /// is admissible when values[i] < values[i+1] and both sides hold at least
  /// min_leaf samples. Score is n_left*gini_left + n_right*gini_right (lower is
  /// better). Returns the first minimiser.
  SplitScan (*min_gini_split)(const double* values, const double* cum_pos,
                              std::size_t n, std::size_t min_leaf);
};

const KernelTable& scalar_table() noexcept;

/// AVX2 table, or nullptr when not compiled in or not supported by the CPU.
const KernelTable* avx2_table() noexcept;

/// Table selected at runtime (cached after the first call).
const KernelTable& active() noexcept;

// Span-based conveniences over the active table.

inline void column_sums(std::span<const double> rows, std::size_t cols,
                        std::span<double> out,
                        const KernelTable& k = active()) {
  k.column_sums(rows.data(), cols ? rows.size() / cols : 0, cols, out.data());
}

inline void column_sq_dev(std::span<const double> rows, std::size_t cols,
                          std::span<const double> center,
                          std::span<double> out,
                          const KernelTable& k = active()) {
  k.column_sq_dev(rows.data(), cols ? rows.size() / cols : 0, cols,
                  center.data(), out.data());
}

inline void affine_columns(std::span<double> rows, std::size_t cols,
                           std::span<const double> shift,
                           std::span<const double> scale,
                           const KernelTable& k = active()) {
  k.affine_columns(rows.data(), cols ? rows.size() / cols : 0, cols,
                   shift.data(), scale.data());
}

}  // namespace afp::kernels
