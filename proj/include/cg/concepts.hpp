#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cg/metric.hpp"
#include "cg/model_io.hpp"

namespace cg {

inline constexpr double kNullDirectionThreshold = 1e-9;
inline constexpr std::size_t kDefaultBaselineSamples = 100000;

/// Canonical unembedding direction of a concept and its Riesz image.
struct ConceptDirection {
  std::string name;
  Vector gamma_bar;   // causal norm 1
  Vector lambda_bar;  // M * gamma_bar
  std::size_t n_pairs = 0;
  Vector raw_mean;    // mean pair difference before normalization
};

/// Difference gamma(id1) - gamma(id0).
Vector pair_difference(const UnembeddingMatrix& gamma, const TokenPair& pair);

/// Normalizes a raw mean difference into a ConceptDirection.
ConceptDirection make_direction(std::string name, Vector raw_mean, std::size_t n_pairs,
                                const MetricContext& mc,
                                double null_threshold = kNullDirectionThreshold);

/// Mean of the pair differences, scaled to unit causal norm.
ConceptDirection estimate_direction(const UnembeddingMatrix& gamma, const ConceptPairSet& pairs,
                                    const MetricContext& mc,
                                    double null_threshold = kNullDirectionThreshold);

/// Element i is estimated from every pair except pair i.
std::vector<ConceptDirection> loo_directions(const UnembeddingMatrix& gamma,
                                             const ConceptPairSet& pairs, const MetricContext& mc);

/// Element i is <loo direction i, difference of pair i>_C.
std::vector<double> project_pairs(const UnembeddingMatrix& gamma, const ConceptPairSet& pairs,
                                  const MetricContext& mc);

/// Projections <gamma_bar, gamma(a) - gamma(b)>_C for `n_samples` uniformly
/// drawn ordered token pairs a != b (with replacement), seeded.
std::vector<double> random_pair_projections(const UnembeddingMatrix& gamma,
                                            const ConceptDirection& dir, std::size_t n_samples,
                                            std::uint64_t seed, const MetricContext& mc);

/// Nearest-rank percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

}  // namespace cg
