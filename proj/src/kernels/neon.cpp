// AArch64 NEON kernels (float64x2_t). Advanced SIMD is mandatory on AArch64,
// so dispatch only needs the compile-time guard.

#include <arm_neon.h>

#include <vector>

#include "kernels/kernels_internal.hpp"

namespace cg::simd::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  float64x2_t acc2 = vdupq_n_f64(0.0);
  float64x2_t acc3 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc2 = vfmaq_f64(acc2, vld1q_f64(a + i + 4), vld1q_f64(b + i + 4));
    acc3 = vfmaq_f64(acc3, vld1q_f64(a + i + 6), vld1q_f64(b + i + 6));
  }
  for (; i + 2 <= n; i += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  double acc = vaddvq_f64(vaddq_f64(vaddq_f64(acc0, acc1), vaddq_f64(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_neon(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::size_t r = 0;
  for (; r + 2 <= rows; r += 2) {
    const double* a0 = a + r * cols;
    const double* a1 = a0 + cols;
    float64x2_t s0 = vdupq_n_f64(0.0);
    float64x2_t s1 = vdupq_n_f64(0.0);
    std::size_t c = 0;
    for (; c + 2 <= cols; c += 2) {
      const float64x2_t vx = vld1q_f64(x + c);
      s0 = vfmaq_f64(s0, vld1q_f64(a0 + c), vx);
      s1 = vfmaq_f64(s1, vld1q_f64(a1 + c), vx);
    }
    double t0 = vaddvq_f64(s0);
    double t1 = vaddvq_f64(s1);
    for (; c < cols; ++c) {
      t0 += a0[c] * x[c];
      t1 += a1[c] * x[c];
    }
    y[r] = t0;
    y[r + 1] = t1;
  }
  for (; r < rows; ++r) y[r] = dot_neon(a + r * cols, x, cols);
}

void centered_gram_neon(const double* x, std::size_t rows, std::size_t cols, const double* mean,
                        double* out) {
  constexpr std::size_t kBlock = kGramRowBlock;
  std::vector<double> block(kBlock * cols, 0.0);
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t count = (rows - r0 < kBlock) ? rows - r0 : kBlock;
    for (std::size_t q = 0; q < kBlock; ++q) {
      double* dst = block.data() + q * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        dst[c] = q < count ? x[(r0 + q) * cols + c] - mean[c] : 0.0;
      }
    }
    const double* c0 = block.data();
    const double* c1 = c0 + cols;
    const double* c2 = c1 + cols;
    const double* c3 = c2 + cols;
    for (std::size_t i = 0; i < cols; ++i) {
      double* out_row = out + i * cols;
      std::size_t j = i;
      for (; j + 2 <= cols; j += 2) {
        float64x2_t acc = vld1q_f64(out_row + j);
        acc = vfmaq_n_f64(acc, vld1q_f64(c0 + j), c0[i]);
        acc = vfmaq_n_f64(acc, vld1q_f64(c1 + j), c1[i]);
        acc = vfmaq_n_f64(acc, vld1q_f64(c2 + j), c2[i]);
        acc = vfmaq_n_f64(acc, vld1q_f64(c3 + j), c3[i]);
        vst1q_f64(out_row + j, acc);
      }
      for (; j < cols; ++j) {
        out_row[j] += c0[i] * c0[j] + c1[i] * c1[j] + c2[i] * c2[j] + c3[i] * c3[j];
      }
    }
  }
}

}  // namespace

const KernelTable kNeonTable{Isa::Neon, dot_neon, axpy_neon, gemv_neon, centered_gram_neon};

}  // namespace cg::simd::detail
