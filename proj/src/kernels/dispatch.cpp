#include "afp/kernels/kernels.hpp"
#include "kernels_internal.hpp"

#include <cstdlib>
#include <string_view>

namespace afp::kernels {

std::string_view to_string(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{
      Isa::scalar,          scalar::column_sums,          scalar::column_sq_dev,
      scalar::affine_columns, scalar::max_mean_shift_split, scalar::min_gini_split,
  };
  return table;
}

const KernelTable* avx2_table() noexcept {
#if defined(AFP_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") != 0;
  }();
  if (!supported) return nullptr;
  static const KernelTable table{
      Isa::avx2,          avx2::column_sums,          avx2::column_sq_dev,
      avx2::affine_columns, avx2::max_mean_shift_split, avx2::min_gini_split,
  };
  return &table;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable& chosen = []() -> const KernelTable& {
    if (const char* env = std::getenv("AFP_SIMD")) {
      if (std::string_view(env) == "scalar") return scalar_table();
    }
    if (const KernelTable* t = avx2_table()) return *t;
    return scalar_table();
  }();
  return chosen;
}

}  // namespace afp::kernels
