#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cg/concepts.hpp"
#include "cg/metric.hpp"
#include "cg/model_io.hpp"

// Softmax model with planted concept structure, hidden behind a random affine
// reparameterization g = A gamma + beta, l = A^{-T} lambda.
//
// Latent layout. For k concepts the vocabulary holds 2^k * J "factorial"
// tokens t(cell, family) (cell bit i = value of concept i) followed by
// filler_ratio * 2^k * J neutral tokens that carry no concept value. Latent
// coordinate i < k of t(cell, j) is f[j][i] + (bit_i - 1/2) * delta[j][i];
// coordinates >= k are background shared by the whole family (plus
// noise_sigma per token). The family/filler offsets are orthogonalized so that
// the latent vocabulary covariance is exactly diagonal when noise_sigma == 0,
// which makes every concept pair causally separable and uncorrelated.

namespace cg {

struct SyntheticSpec {
  std::size_t dim = 16;
  std::size_t n_concepts = 4;
  std::size_t vocab_per_cell = 16;       // families J
  std::size_t filler_ratio = 0;          // neutral tokens per factorial token
  std::size_t pairs_per_concept = 32;    // 0 = every available pair
  double noise_sigma = 0.05;             // per-token background noise
  double delta_lo = 1.0;                 // concept gap range for pairs
  double delta_hi = 1.5;
  double concept_jitter = 0.1;           // spread of concept coordinates
  double background_scale = 1.0;         // spread of background coordinates
  double max_condition = 100.0;          // cap on cond(A)
  std::size_t probe_contexts_per_group = 500;
  std::size_t intervention_contexts = 3;
  std::uint64_t seed = 0;
  std::optional<Matrix> transform;       // fixes A instead of sampling it
  std::optional<Vector> shift;           // fixes beta instead of sampling it

  void validate() const;
};

struct GroundTruth {
  std::vector<Vector> gamma_bars;   // planted canonical directions (observed coordinates)
  std::vector<Vector> lambda_bars;  // their Riesz images under metric_true
  Matrix metric_true;               // A^{-T} diag(1 / sd^2) A^{-1}
  Matrix planted_basis;             // column l = sd_l * A e_l, all d latent axes
  Vector latent_sd;                 // per-coordinate latent standard deviation
};

struct SyntheticModel {
  SyntheticSpec spec;
  Matrix latent;          // V x d latent unembeddings
  Matrix transform;       // A
  Matrix transform_inv;   // A^{-1}
  Vector shift;           // beta
  UnembeddingMatrix gamma;
  std::vector<std::string> concept_names;
  std::vector<ConceptPairSet> pair_sets;  // one per concept, same order
  /// quads[0] is (c0, c1) anchored on the intervention family; the rest cover
  /// the other concept pairs with the same anchor.
  std::vector<ConceptQuadruple> quads;
  std::size_t probe_concept = 0;
  /// Latent probe-concept coordinate -3 sd (label "<name>:0") or +3 sd
  /// ("<name>:1"); every other coordinate standard normal.
  EmbeddingSet probe_contexts;
  /// Contexts whose top-1 token is quads[0].y00(); steering along c0 by
  /// alpha = 0.4 moves the top-1 to quads[0].y10(). Exact when noise_sigma == 0.
  EmbeddingSet intervention_contexts;
  GroundTruth truth;

  std::size_t n_cells() const noexcept { return std::size_t{1} << spec.n_concepts; }
  std::size_t factorial_tokens() const noexcept { return n_cells() * spec.vocab_per_cell; }
  TokenId token(std::size_t cell, std::size_t family) const;
};

SyntheticModel build_synthetic(const SyntheticSpec& spec);

const GroundTruth& ground_truth(const SyntheticModel& model);

/// Random A = Q1 S Q2^T with Haar-random orthogonal factors. S has one
/// dominant singular value `max_condition`, one equal to 1, and the rest
/// log-uniform on [1, sqrt(max_condition)], so cond(A) = max_condition and the
/// observed space is anisotropic. Resampled if the realized condition number
/// exceeds the cap.
Matrix random_transform(std::size_t d, double max_condition, std::mt19937_64& rng);

/// Rows gamma -> A0 gamma + beta0.
UnembeddingMatrix transform_unembeddings(const UnembeddingMatrix& gamma, const Matrix& a0,
                                         std::span<const double> beta0);
/// Rows lambda -> A0^{-T} lambda, given A0^{-1}.
EmbeddingSet transform_embeddings(const EmbeddingSet& set, const Matrix& a0_inv);

/// The same model seen through a further reparameterization (A0, beta0).
SyntheticModel reparameterize(const SyntheticModel& model, const Matrix& a0,
                              std::span<const double> beta0);

/// Pairs that flip concepts a and b together: a non-separable construct that
/// shares a latent coordinate with both.
ConceptPairSet overlapping_pairs(const SyntheticModel& model, std::size_t a, std::size_t b);

/// Pearson correlation of lambda_a^T gamma(y) and lambda_b^T gamma(y) over the
/// vocabulary.
double uncorrelatedness_check(const UnembeddingMatrix& gamma, std::span<const double> lambda_a,
                              std::span<const double> lambda_b);

struct VerifyReport {
  std::vector<std::string> concept_names;
  Vector dir_cos;    // causal cosine of estimated vs planted gamma_bar
  Vector riesz_cos;  // same for lambda_bar, under the dual metric
  double heatmap_offdiag_max = 0.0;
  double euclidean_offdiag_median = 0.0;
  double explicit_offdiag_rel = 0.0;
  double explicit_m_residual = 0.0;
  double uncorrelatedness_max = 0.0;
};

std::vector<ConceptDirection> estimate_concepts(const SyntheticModel& model, const MetricContext& mc);

VerifyReport verify_report(const SyntheticModel& model, const MetricContext& mc);

}  // namespace cg
