#pragma once

#include <span>
#include <string>
#include <vector>

#include "cg/concepts.hpp"
#include "cg/model_io.hpp"

namespace cg {

/// 0, 0.05, ..., 0.4
std::vector<double> default_alpha_grid();

/// lambda + alpha * lambda_bar
Vector intervene(std::span<const double> lambda, const ConceptDirection& dir, double alpha);

struct TrajectorySeries {
  std::vector<double> target;     // log Pr(Y(1,0)) / Pr(Y(0,0)) per alpha
  std::vector<double> offtarget;  // log Pr(Y(0,1)) / Pr(Y(0,0)) per alpha
};

struct TrajectoryReport {
  std::string concept_used;
  std::vector<double> alphas;
  std::vector<std::vector<double>> target_logits;     // one series per context
  std::vector<std::vector<double>> offtarget_logits;  // one series per context
};

/// Pairwise logits of the quadruple along the steered embedding
/// lambda + alpha * lambda_bar for each alpha (strictly ascending).
TrajectorySeries logit_trajectory(std::span<const double> lambda, const ConceptQuadruple& quad,
                                  const ConceptDirection& dir, const UnembeddingMatrix& gamma,
                                  std::span<const double> alphas);

TrajectoryReport logit_trajectories(const EmbeddingSet& contexts, const ConceptQuadruple& quad,
                                    const ConceptDirection& dir, const UnembeddingMatrix& gamma,
                                    std::span<const double> alphas);

struct ScoredToken {
  TokenId id;
  double logit;
  bool operator==(const ScoredToken&) const = default;
};

/// Top-k tokens by (lambda + alpha * lambda_bar)^T gamma(y), descending; ties
/// go to the smaller token id.
std::vector<ScoredToken> topk_after_intervention(const UnembeddingMatrix& gamma,
                                                 std::span<const double> lambda,
                                                 const ConceptDirection& dir, double alpha,
                                                 std::size_t k);

}  // namespace cg
