// Reference kernels. These define the semantics the vector variants are
// tested against; keep them straightforward.

#include <vector>

#include "kernels/kernels_internal.hpp"

namespace cg::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * cols, x, cols);
}

void centered_gram_scalar(const double* x, std::size_t rows, std::size_t cols, const double* mean,
                          double* out) {
  std::vector<double> centered(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x + r * cols;
    for (std::size_t c = 0; c < cols; ++c) centered[c] = row[c] - mean[c];
    for (std::size_t i = 0; i < cols; ++i) {
      const double ci = centered[i];
      double* out_row = out + i * cols;
      for (std::size_t j = i; j < cols; ++j) out_row[j] += ci * centered[j];
    }
  }
}

}  // namespace

const KernelTable kScalarTable{Isa::Scalar, dot_scalar, axpy_scalar, gemv_scalar,
                               centered_gram_scalar};

}  // namespace cg::simd::detail
