#include "cg/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cg/concepts.hpp"
#include "cg/error.hpp"
#include "cg/kernels.hpp"

namespace cg {
namespace {

void check_dim(std::size_t got, std::size_t want, const char* what) {
  require(got == want, ErrorCode::DimMismatch,
          std::string(what) + ": expected dimension " + std::to_string(want) + ", got " +
              std::to_string(got));
}

// Smallest eigenvalue accepted as positive, relative to the largest.
double positivity_floor(const Vector& eigenvalues) {
  const double largest = std::max(eigenvalues.back(), 0.0);
  return largest * static_cast<double>(eigenvalues.size()) * std::numeric_limits<double>::epsilon();
}

Vector inverse_spectrum(const SymmetricEigen& eig, const char* what) {
  require(!eig.values.empty() && eig.values.front() > positivity_floor(eig.values) &&
              eig.values.front() > 0.0,
          ErrorCode::SingularAfterRidge,
          std::string(what) + ": smallest eigenvalue " + std::to_string(eig.values.front()) +
              " is not positive");
  Vector inv(eig.values.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / eig.values[i];
  return inv;
}

}  // namespace

VocabMoments vocab_covariance(const UnembeddingMatrix& gamma) {
  const std::size_t v = gamma.vocab_size();
  const std::size_t d = gamma.dim();
  require(v >= 2, ErrorCode::DegenerateVocab, "covariance needs at least 2 tokens");
  const Matrix& rows = gamma.matrix();

  Vector mean(d, 0.0);
  for (std::size_t r = 0; r < v; ++r) simd::axpy(1.0, rows.row(r), mean);
  for (double& m : mean) m /= static_cast<double>(v);

  Matrix cov(d, d);
  simd::centered_gram(rows.values(), v, d, mean, cov.values());
  const double inv_v = 1.0 / static_cast<double>(v);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) *= inv_v;
      cov(j, i) = cov(i, j);
    }
  }
  return {std::move(mean), std::move(cov)};
}

MetricContext causal_metric(const Matrix& cov, double ridge_rel) {
  require(cov.rows() == cov.cols(), ErrorCode::NotSquare, "covariance is not square");
  require(cov.rows() >= 1, ErrorCode::DimMismatch, "covariance is empty");
  require(ridge_rel >= 0.0 && std::isfinite(ridge_rel), ErrorCode::InvalidArgument,
          "ridge_rel must be finite and >= 0");
  require(all_finite(cov.values()), ErrorCode::NonFiniteEntry, "covariance has non-finite entries");
  const std::size_t d = cov.rows();

  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);

  MetricContext mc;
  mc.cov = cov;
  mc.ridge_rel = ridge_rel;
  mc.ridge = ridge_rel * trace / static_cast<double>(d);

  Matrix regularized = cov;
  for (std::size_t i = 0; i < d; ++i) regularized(i, i) += mc.ridge;
  const SymmetricEigen eig = symmetric_eigen(regularized);
  const Vector inv = inverse_spectrum(eig, "causal_metric");

  Vector inv_sqrt(d);
  for (std::size_t i = 0; i < d; ++i) inv_sqrt[i] = std::sqrt(inv[i]);
  mc.metric = reconstruct(eig, inv);
  mc.whitening = reconstruct(eig, inv_sqrt);
  mc.cov_eigenvalues = eig.values;
  return mc;
}

MetricContext causal_metric(const UnembeddingMatrix& gamma, double ridge_rel) {
  VocabMoments moments = vocab_covariance(gamma);
  MetricContext mc = causal_metric(moments.cov, ridge_rel);
  mc.mean = std::move(moments.mean);
  return mc;
}

double cip(std::span<const double> u, std::span<const double> v, const MetricContext& mc) {
  check_dim(u.size(), mc.dim(), "cip");
  check_dim(v.size(), mc.dim(), "cip");
  const Vector mv = matvec(mc.metric, v);
  return simd::dot(u, mv);
}

double causal_norm(std::span<const double> u, const MetricContext& mc) {
  return std::sqrt(std::max(cip(u, u, mc), 0.0));
}

double dual_cip(std::span<const double> l, std::span<const double> lp, const MetricContext& mc) {
  check_dim(l.size(), mc.dim(), "dual_cip");
  check_dim(lp.size(), mc.dim(), "dual_cip");
  const Vector cv = matvec(mc.cov, lp);
  return simd::dot(l, cv) + mc.ridge * simd::dot(l, lp);
}

Vector riesz_map(std::span<const double> gamma_bar, const MetricContext& mc) {
  check_dim(gamma_bar.size(), mc.dim(), "riesz_map");
  return matvec(mc.metric, gamma_bar);
}

Vector whiten(std::span<const double> v, const MetricContext& mc) {
  check_dim(v.size(), mc.dim(), "whiten");
  return matvec(mc.whitening, v);
}

Matrix whiten_matrix(const Matrix& m, const MetricContext& mc) {
  check_dim(m.cols(), mc.dim(), "whiten_matrix");
  // Rows times A^T, and A is symmetric.
  return matmul(m, mc.whitening);
}

std::string_view metric_kind_name(MetricKind kind) noexcept {
  return kind == MetricKind::Causal ? "causal" : "euclidean";
}

MetricKind parse_metric_kind(std::string_view name) {
  if (name == "causal") return MetricKind::Causal;
  if (name == "euclidean") return MetricKind::Euclidean;
  fail(ErrorCode::InvalidArgument, "unknown metric kind '" + std::string(name) + "'");
}

Matrix heatmap(std::span<const Vector> gamma_bars, const MetricContext& mc, MetricKind kind) {
  const std::size_t k = gamma_bars.size();
  require(k >= 1, ErrorCode::InvalidArgument, "heatmap needs at least one direction");
  std::vector<Vector> images;  // M g for causal, g itself for Euclidean
  images.reserve(k);
  for (const Vector& g : gamma_bars) {
    check_dim(g.size(), mc.dim(), "heatmap");
    images.push_back(kind == MetricKind::Causal ? matvec(mc.metric, g) : g);
  }
  Matrix gram(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double v = 0.5 * (simd::dot(gamma_bars[i], images[j]) + simd::dot(gamma_bars[j], images[i]));
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  Matrix out(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    require(gram(i, i) > 0.0, ErrorCode::NullDirection,
            "heatmap: direction " + std::to_string(i) + " has zero norm");
    for (std::size_t j = 0; j < k; ++j) {
      out(i, j) = std::abs(gram(i, j)) / std::sqrt(gram(i, i) * gram(j, j));
    }
  }
  return out;
}

Matrix heatmap(std::span<const ConceptDirection> dirs, const MetricContext& mc, MetricKind kind) {
  std::vector<Vector> gammas;
  gammas.reserve(dirs.size());
  for (const auto& d : dirs) gammas.push_back(d.gamma_bar);
  return heatmap(std::span<const Vector>(gammas), mc, kind);
}

ExplicitFormReport explicit_form_check(const Matrix& basis, const Matrix& cov) {
  require(basis.rows() == basis.cols(), ErrorCode::NotSquare, "basis must be d x d");
  require(cov.rows() == cov.cols() && cov.rows() == basis.rows(), ErrorCode::DimMismatch,
          "covariance and basis dimensions differ");
  const std::size_t d = basis.rows();

  const SymmetricEigen eig = symmetric_eigen(cov);
  const Matrix cov_inv = reconstruct(eig, inverse_spectrum(eig, "explicit_form_check"));
  const Matrix product = matmul(transpose(basis), matmul(cov_inv, basis));

  ExplicitFormReport report;
  report.d_entries.resize(d);
  double min_diag = std::numeric_limits<double>::infinity();
  double max_off = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    report.d_entries[i] = product(i, i);
    min_diag = std::min(min_diag, std::abs(product(i, i)));
    for (std::size_t j = 0; j < d; ++j) {
      if (i != j) max_off = std::max(max_off, std::abs(product(i, j)));
    }
  }
  report.offdiag_rel = min_diag > 0.0 ? max_off / min_diag : std::numeric_limits<double>::infinity();

  const Matrix implied = matmul(basis, transpose(basis));
  report.m_residual = frobenius_norm(subtract(implied, cov)) / frobenius_norm(cov);
  return report;
}

}  // namespace cg
