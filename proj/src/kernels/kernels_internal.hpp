#pragma once

#include "afp/kernels/kernels.hpp"

namespace afp::kernels::scalar {
void column_sums(const double*, std::size_t, std::size_t, double*);
void column_sq_dev(const double*, std::size_t, std::size_t, const double*, double*);
void affine_columns(double*, std::size_t, std::size_t, const double*, const double*);
SplitScan max_mean_shift_split(const double*, std::size_t, std::size_t,
                               std::size_t, const double*, const double*,
                               const double*);
SplitScan min_gini_split(const double*, const double*, std::size_t, std::size_t);
}  // namespace afp::kernels::scalar

#if defined(AFP_HAVE_AVX2)
namespace afp::kernels::avx2 {
void column_sums(const double*, std::size_t, std::size_t, double*);
void column_sq_dev(const double*, std::size_t, std::size_t, const double*, double*);
void affine_columns(double*, std::size_t, std::size_t, const double*, const double*);
SplitScan max_mean_shift_split(const double*, std::size_t, std::size_t,
                               std::size_t, const double*, const double*,
                               const double*);
SplitScan min_gini_split(const double*, const double*, std::size_t, std::size_t);
}  // namespace afp::kernels::avx2
#endif
