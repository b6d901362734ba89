// AVX2 + FMA kernels. This file is compiled with -mavx2 -mfma and must only be
// entered after dispatch has confirmed CPU support.

#ifdef __x86_64__
#ifndef __AVX2__
#error "this should be compiled with AVX2"
#endif
#endif

#include <immintrin.h>

#include <vector>

#include "kernels/kernels_internal.hpp"

namespace cg::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::size_t r = 0;
  // Four rows share each load of x.
  for (; r + 4 <= rows; r += 4) {
    const double* a0 = a + r * cols;
    const double* a1 = a0 + cols;
    const double* a2 = a1 + cols;
    const double* a3 = a2 + cols;
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    __m256d s2 = _mm256_setzero_pd();
    __m256d s3 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vx = _mm256_loadu_pd(x + c);
      s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a0 + c), vx, s0);
      s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a1 + c), vx, s1);
      s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a2 + c), vx, s2);
      s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a3 + c), vx, s3);
    }
    double t0 = hsum(s0);
    double t1 = hsum(s1);
    double t2 = hsum(s2);
    double t3 = hsum(s3);
    for (; c < cols; ++c) {
      t0 += a0[c] * x[c];
      t1 += a1[c] * x[c];
      t2 += a2[c] * x[c];
      t3 += a3[c] * x[c];
    }
    y[r] = t0;
    y[r + 1] = t1;
    y[r + 2] = t2;
    y[r + 3] = t3;
  }
  for (; r < rows; ++r) y[r] = dot_avx2(a + r * cols, x, cols);
}

void centered_gram_avx2(const double* x, std::size_t rows, std::size_t cols, const double* mean,
                        double* out) {
  constexpr std::size_t kBlock = kGramRowBlock;
  // Padding rows stay zero so a partial final block contributes nothing extra.
  std::vector<double> block(kBlock * cols, 0.0);
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t count = (rows - r0 < kBlock) ? rows - r0 : kBlock;
    for (std::size_t q = 0; q < kBlock; ++q) {
      double* dst = block.data() + q * cols;
      if (q < count) {
        const double* src = x + (r0 + q) * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] = src[c] - mean[c];
      } else {
        for (std::size_t c = 0; c < cols; ++c) dst[c] = 0.0;
      }
    }
    const double* c0 = block.data();
    const double* c1 = c0 + cols;
    const double* c2 = c1 + cols;
    const double* c3 = c2 + cols;
    for (std::size_t i = 0; i < cols; ++i) {
      const __m256d b0 = _mm256_set1_pd(c0[i]);
      const __m256d b1 = _mm256_set1_pd(c1[i]);
      const __m256d b2 = _mm256_set1_pd(c2[i]);
      const __m256d b3 = _mm256_set1_pd(c3[i]);
      double* out_row = out + i * cols;
      std::size_t j = i;
      for (; j + 4 <= cols; j += 4) {
        __m256d acc = _mm256_loadu_pd(out_row + j);
        acc = _mm256_fmadd_pd(b0, _mm256_loadu_pd(c0 + j), acc);
        acc = _mm256_fmadd_pd(b1, _mm256_loadu_pd(c1 + j), acc);
        acc = _mm256_fmadd_pd(b2, _mm256_loadu_pd(c2 + j), acc);
        acc = _mm256_fmadd_pd(b3, _mm256_loadu_pd(c3 + j), acc);
        _mm256_storeu_pd(out_row + j, acc);
      }
      for (; j < cols; ++j) {
        out_row[j] += c0[i] * c0[j] + c1[i] * c1[j] + c2[i] * c2[j] + c3[i] * c3[j];
      }
    }
  }
}

}  // namespace

const KernelTable kAvx2Table{Isa::Avx2, dot_avx2, axpy_avx2, gemv_avx2, centered_gram_avx2};

}  // namespace cg::simd::detail
