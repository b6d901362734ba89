#include "cg/concepts.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cg/error.hpp"
#include "cg/kernels.hpp"

namespace cg {

Vector pair_difference(const UnembeddingMatrix& gamma, const TokenPair& pair) {
  return subtract(gamma.row(pair.id1), gamma.row(pair.id0));
}

ConceptDirection make_direction(std::string name, Vector raw_mean, std::size_t n_pairs,
                                const MetricContext& mc, double null_threshold) {
  require(raw_mean.size() == mc.dim(), ErrorCode::DimMismatch,
          "concept '" + name + "': dimension differs from metric");
  const double len = causal_norm(raw_mean, mc);
  require(len > null_threshold, ErrorCode::NullDirection,
          "concept '" + name + "': mean pair difference has causal norm " + std::to_string(len));
  ConceptDirection dir;
  dir.name = std::move(name);
  dir.gamma_bar = scaled(raw_mean, 1.0 / len);
  dir.lambda_bar = riesz_map(dir.gamma_bar, mc);
  dir.n_pairs = n_pairs;
  dir.raw_mean = std::move(raw_mean);
  return dir;
}

ConceptDirection estimate_direction(const UnembeddingMatrix& gamma, const ConceptPairSet& pairs,
                                    const MetricContext& mc, double null_threshold) {
  pairs.validate(gamma.vocab_size());
  require(gamma.dim() == mc.dim(), ErrorCode::DimMismatch, "unembedding and metric dimensions differ");
  const std::size_t n = pairs.pairs.size();
  Vector sum(gamma.dim(), 0.0);
  // Differences are formed before accumulation so that swapping the order of
  // every pair negates the sum bit-for-bit.
  for (const TokenPair& p : pairs.pairs) simd::axpy(1.0, pair_difference(gamma, p), sum);
  return make_direction(pairs.name, scaled(sum, 1.0 / static_cast<double>(n)), n, mc, null_threshold);
}

std::vector<ConceptDirection> loo_directions(const UnembeddingMatrix& gamma,
                                             const ConceptPairSet& pairs, const MetricContext& mc) {
  pairs.validate(gamma.vocab_size());
  require(gamma.dim() == mc.dim(), ErrorCode::DimMismatch, "unembedding and metric dimensions differ");
  const std::size_t n = pairs.pairs.size();
  require(n >= 2, ErrorCode::TooFewPairs,
          "concept '" + pairs.name + "': leave-one-out needs at least 2 pairs");

  std::vector<Vector> diffs;
  diffs.reserve(n);
  for (const TokenPair& p : pairs.pairs) diffs.push_back(pair_difference(gamma, p));

  std::vector<ConceptDirection> out;
  out.reserve(n);
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    // Summed directly rather than total-minus-one so that identical
    // differences give bit-identical leave-one-out means.
    Vector sum(gamma.dim(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) simd::axpy(1.0, diffs[j], sum);
    }
    out.push_back(make_direction(pairs.name, scaled(sum, inv), n - 1, mc));
  }
  return out;
}

std::vector<double> project_pairs(const UnembeddingMatrix& gamma, const ConceptPairSet& pairs,
                                  const MetricContext& mc) {
  const auto loo = loo_directions(gamma, pairs, mc);
  std::vector<double> out(loo.size());
  for (std::size_t i = 0; i < loo.size(); ++i) {
    const Vector diff = pair_difference(gamma, pairs.pairs[i]);
    // <g, diff>_C = (M g)^T diff, and lambda_bar already holds M g.
    out[i] = simd::dot(loo[i].lambda_bar, diff);
  }
  return out;
}

std::vector<double> random_pair_projections(const UnembeddingMatrix& gamma,
                                            const ConceptDirection& dir, std::size_t n_samples,
                                            std::uint64_t seed, const MetricContext& mc) {
  const std::size_t v = gamma.vocab_size();
  require(v >= 2, ErrorCode::DegenerateVocab, "random pairs need at least 2 tokens");
  require(n_samples >= 1, ErrorCode::InvalidArgument, "n_samples must be >= 1");
  const Vector functional = riesz_map(dir.gamma_bar, mc);

  // One gemv gives every token's score; each projection is then a difference.
  Vector scores(v);
  simd::gemv(gamma.matrix().values(), v, gamma.dim(), functional, scores);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> first(0, v - 1);
  std::uniform_int_distribution<std::size_t> second(0, v - 2);
  std::vector<double> out(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const std::size_t a = first(rng);
    std::size_t b = second(rng);
    if (b >= a) ++b;
    out[s] = scores[a] - scores[b];
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorCode::InvalidArgument, "percentile of empty list");
  require(q >= 0.0 && q <= 100.0, ErrorCode::InvalidArgument, "percentile q outside [0, 100]");
  const auto n = values.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

}  // namespace cg
