#include "cg/intervene.hpp"

#include <algorithm>
#include <numeric>

#include "cg/error.hpp"
#include "cg/kernels.hpp"
#include "cg/probe.hpp"

namespace cg {
namespace {

void check_alphas(std::span<const double> alphas) {
  require(!alphas.empty(), ErrorCode::InvalidArgument, "alpha grid is empty");
  require(all_finite(alphas), ErrorCode::InvalidArgument, "alpha grid has non-finite values");
  for (std::size_t i = 1; i < alphas.size(); ++i) {
    require(alphas[i] > alphas[i - 1], ErrorCode::InvalidArgument, "alpha grid must be strictly ascending");
  }
}

}  // namespace

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 8; ++i) grid.push_back(0.05 * i);
  return grid;
}

Vector intervene(std::span<const double> lambda, const ConceptDirection& dir, double alpha) {
  require(lambda.size() == dir.lambda_bar.size(), ErrorCode::DimMismatch, "intervene: dimension");
  Vector out(lambda.begin(), lambda.end());
  simd::axpy(alpha, dir.lambda_bar, out);
  return out;
}

TrajectorySeries logit_trajectory(std::span<const double> lambda, const ConceptQuadruple& quad,
                                  const ConceptDirection& dir, const UnembeddingMatrix& gamma,
                                  std::span<const double> alphas) {
  quad.validate(gamma.vocab_size());
  check_alphas(alphas);
  TrajectorySeries series;
  series.target.reserve(alphas.size());
  series.offtarget.reserve(alphas.size());
  for (double alpha : alphas) {
    const Vector steered = intervene(lambda, dir, alpha);
    series.target.push_back(pair_logit(steered, gamma, quad.y10(), quad.y00()));
    series.offtarget.push_back(pair_logit(steered, gamma, quad.y01(), quad.y00()));
  }
  return series;
}

TrajectoryReport logit_trajectories(const EmbeddingSet& contexts, const ConceptQuadruple& quad,
                                    const ConceptDirection& dir, const UnembeddingMatrix& gamma,
                                    std::span<const double> alphas) {
  TrajectoryReport report;
  report.concept_used = dir.name;
  report.alphas.assign(alphas.begin(), alphas.end());
  for (std::size_t j = 0; j < contexts.size(); ++j) {
    TrajectorySeries s = logit_trajectory(contexts.vectors.row(j), quad, dir, gamma, alphas);
    report.target_logits.push_back(std::move(s.target));
    report.offtarget_logits.push_back(std::move(s.offtarget));
  }
  return report;
}

std::vector<ScoredToken> topk_after_intervention(const UnembeddingMatrix& gamma,
                                                 std::span<const double> lambda,
                                                 const ConceptDirection& dir, double alpha,
                                                 std::size_t k) {
  const std::size_t v = gamma.vocab_size();
  require(k >= 1 && k <= v, ErrorCode::KOutOfRange,
          "k = " + std::to_string(k) + " outside [1, " + std::to_string(v) + "]");
  require(lambda.size() == gamma.dim(), ErrorCode::DimMismatch, "topk: embedding dimension");
  const Vector steered = intervene(lambda, dir, alpha);
  Vector logits(v);
  simd::gemv(gamma.matrix().values(), v, gamma.dim(), steered, logits);

  std::vector<TokenId> order(v);
  std::iota(order.begin(), order.end(), TokenId{0});
  const auto better = [&](TokenId a, TokenId b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);

  std::vector<ScoredToken> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({order[i], logits[order[i]]});
  return out;
}

}  // namespace cg
