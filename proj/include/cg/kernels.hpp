#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

// Data-parallel inner loops used by the toolkit. Every kernel has a scalar
// reference implementation; wider variants (AVX2+FMA on x86-64, NEON on
// AArch64) are compiled into separate translation units and picked at runtime
// from what the CPU reports.

namespace cg::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[r] = sum_c a[r * cols + c] * x[c]; `a` is row-major rows x cols.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // Upper triangle (c >= r) of out += sum_i (x_i - mean)(x_i - mean)^T over the
  // rows of the row-major `x`. `out` is cols x cols row-major; the strict lower
  // triangle is left untouched.
  void (*centered_gram)(const double* x, std::size_t rows, std::size_t cols, const double* mean,
                        double* out);
};

/// Kernels for `isa`, or nullptr when that variant is not compiled in or the
/// running CPU cannot execute it.
const KernelTable* table_for(Isa isa) noexcept;

/// Every ISA usable on this machine, scalar first.
std::vector<Isa> available_isas();

/// Widest usable ISA.
Isa detect_best_isa() noexcept;

/// Table currently used by the library-level wrappers below.
const KernelTable& active();

/// Overrides the runtime choice (tests and benchmarks). Throws cg::Error
/// (InvalidArgument) if the ISA is unavailable.
void force_isa(Isa isa);

/// Restores the detected default.
void reset_isa() noexcept;

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void centered_gram(std::span<const double> x, std::size_t rows, std::size_t cols,
                   std::span<const double> mean, std::span<double> out);

}  // namespace cg::simd
