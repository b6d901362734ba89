#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "cg/matrix.hpp"
#include "cg/model_io.hpp"

namespace cg {

struct ConceptDirection;

inline constexpr double kDefaultRidgeRel = 1e-6;

struct VocabMoments {
  Vector mean;
  Matrix cov;  // population (1/V) covariance
};

/// Mean and covariance of the unembedding of a uniformly random token.
VocabMoments vocab_covariance(const UnembeddingMatrix& gamma);

/// Causal inner product <u, v>_C = u^T M v with M = (Cov + ridge I)^{-1}, plus
/// the symmetric whitening A = M^{1/2}. Built once, then read-only.
struct MetricContext {
  Vector mean;             // may be empty when built from a bare covariance
  Matrix cov;              // unregularized input covariance
  Matrix metric;           // M
  Matrix whitening;        // A, symmetric positive definite, A * A = M
  Vector cov_eigenvalues;  // eigenvalues of cov + ridge I, ascending
  double ridge_rel = 0.0;
  double ridge = 0.0;      // absolute value added to the diagonal

  std::size_t dim() const noexcept { return metric.rows(); }
};

/// `ridge_rel` is relative to the mean eigenvalue trace(cov) / d. Fails with
/// SingularAfterRidge when the regularized covariance is not numerically
/// positive definite.
MetricContext causal_metric(const Matrix& cov, double ridge_rel = kDefaultRidgeRel);
MetricContext causal_metric(const UnembeddingMatrix& gamma, double ridge_rel = kDefaultRidgeRel);

double cip(std::span<const double> u, std::span<const double> v, const MetricContext& mc);
double causal_norm(std::span<const double> u, const MetricContext& mc);

/// Inner product the metric induces on the embedding (context) side:
/// <l, l'> = l^T M^{-1} l'. Riesz images of directions keep their causal
/// inner products under it.
double dual_cip(std::span<const double> l, std::span<const double> lp, const MetricContext& mc);

/// gamma -> M gamma: unembedding direction to embedding (steering) direction.
Vector riesz_map(std::span<const double> gamma_bar, const MetricContext& mc);

Vector whiten(std::span<const double> v, const MetricContext& mc);
/// Row-wise A * row.
Matrix whiten_matrix(const Matrix& m, const MetricContext& mc);

enum class MetricKind { Causal, Euclidean };

std::string_view metric_kind_name(MetricKind kind) noexcept;
MetricKind parse_metric_kind(std::string_view name);

/// k x k matrix of |<g_i, g_j>| / (|g_i| |g_j|) under the chosen inner product.
Matrix heatmap(std::span<const ConceptDirection> dirs, const MetricContext& mc, MetricKind kind);
Matrix heatmap(std::span<const Vector> gamma_bars, const MetricContext& mc, MetricKind kind);

struct ExplicitFormReport {
  double offdiag_rel = 0.0;  // max |offdiag| / min |diag| of G^T Cov^{-1} G
  Vector d_entries;          // diag of G^T Cov^{-1} G
  double m_residual = 0.0;   // |G G^T - Cov|_F / |Cov|_F  (D = I)
};

/// Checks whether the columns of `basis` diagonalize Cov^{-1} and whether
/// G G^T reproduces M^{-1} = Cov for the D = I choice.
ExplicitFormReport explicit_form_check(const Matrix& basis, const Matrix& cov);

}  // namespace cg
