#pragma once

#include "cg/kernels.hpp"

namespace cg::simd::detail {

extern const KernelTable kScalarTable;

#if defined(CG_HAVE_AVX2_KERNELS)
extern const KernelTable kAvx2Table;
#endif

#if defined(CG_HAVE_NEON_KERNELS)
extern const KernelTable kNeonTable;
#endif

// Rows of x processed together by the blocked gram kernels.
inline constexpr std::size_t kGramRowBlock = 4;

}  // namespace cg::simd::detail
