#include <atomic>
#include <string>

#include "cg/error.hpp"
#include "kernels/kernels_internal.hpp"

namespace cg::simd {
namespace {

bool cpu_has_avx2_fma() noexcept {
#if defined(CG_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<const KernelTable*> g_active{nullptr};

void check_sizes(bool ok, const char* what) {
  require(ok, ErrorCode::DimMismatch, std::string("kernel size mismatch in ") + what);
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

const KernelTable* table_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return &detail::kScalarTable;
    case Isa::Avx2:
#if defined(CG_HAVE_AVX2_KERNELS)
      if (cpu_has_avx2_fma()) return &detail::kAvx2Table;
#endif
      return nullptr;
    case Isa::Neon:
#if defined(CG_HAVE_NEON_KERNELS)
      return &detail::kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
    if (table_for(isa) != nullptr) out.push_back(isa);
  }
  return out;
}

Isa detect_best_isa() noexcept {
  if (table_for(Isa::Avx2) != nullptr) return Isa::Avx2;
  if (table_for(Isa::Neon) != nullptr) return Isa::Neon;
  return Isa::Scalar;
}

const KernelTable& active() {
  const KernelTable* table = g_active.load(std::memory_order_acquire);
  if (table == nullptr) {
    table = table_for(detect_best_isa());
    g_active.store(table, std::memory_order_release);
  }
  return *table;
}

void force_isa(Isa isa) {
  const KernelTable* table = table_for(isa);
  require(table != nullptr, ErrorCode::InvalidArgument,
          std::string("ISA not available on this machine: ") + std::string(isa_name(isa)));
  g_active.store(table, std::memory_order_release);
}

void reset_isa() noexcept { g_active.store(table_for(detect_best_isa()), std::memory_order_release); }

double dot(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size() == b.size(), "dot");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_sizes(x.size() == y.size(), "axpy");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  check_sizes(a.size() == rows * cols && x.size() == cols && y.size() == rows, "gemv");
  active().gemv(a.data(), rows, cols, x.data(), y.data());
}

void centered_gram(std::span<const double> x, std::size_t rows, std::size_t cols,
                   std::span<const double> mean, std::span<double> out) {
  check_sizes(x.size() == rows * cols && mean.size() == cols && out.size() == cols * cols,
              "centered_gram");
  active().centered_gram(x.data(), rows, cols, mean.data(), out.data());
}

}  // namespace cg::simd
