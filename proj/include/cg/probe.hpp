#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cg/concepts.hpp"
#include "cg/model_io.hpp"

namespace cg {

/// logit Pr(Y = id1 | Y in {id0, id1}, lambda) = lambda^T (gamma(id1) - gamma(id0)).
double pair_logit(std::span<const double> lambda, const UnembeddingMatrix& gamma, TokenId id1,
                  TokenId id0);

/// gamma_bar^T lambda (plain dot product against a context embedding).
double probe_score(const ConceptDirection& dir, std::span<const double> lambda);

/// Coefficient <gamma(id1) - gamma(id0), gamma_bar>_C of a pair difference on
/// the canonical direction.
double alpha_hat(const UnembeddingMatrix& gamma, TokenId id1, TokenId id0,
                 const ConceptDirection& dir, const MetricContext& mc);

/// Probability that a score from `positive` exceeds one from `negative`,
/// ties counted half (Mann-Whitney form of the ROC AUC).
double rank_auc(std::span<const double> negative, std::span<const double> positive);

struct ProbeReport {
  std::string direction_name;
  std::vector<double> scores_a;
  std::vector<double> scores_b;
  double auc = 0.5;  // group b is the positive class
};

/// Rows of `set` whose label equals `label`, in order.
EmbeddingSet select_label(const EmbeddingSet& set, std::string_view label);

ProbeReport probe_report(const ConceptDirection& dir, const EmbeddingSet& contexts_a,
                         const EmbeddingSet& contexts_b);

}  // namespace cg
