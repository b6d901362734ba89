#include "cg/probe.hpp"

#include <algorithm>
#include <numeric>

#include "cg/error.hpp"
#include "cg/kernels.hpp"

namespace cg {
namespace {

std::vector<double> score_rows(const ConceptDirection& dir, const EmbeddingSet& set) {
  require(set.dim() == dir.gamma_bar.size(), ErrorCode::DimMismatch,
          "contexts and direction '" + dir.name + "' have different dimensions");
  std::vector<double> scores(set.size());
  if (!scores.empty()) {
    simd::gemv(set.vectors.values(), set.size(), set.dim(), dir.gamma_bar, scores);
  }
  return scores;
}

}  // namespace

double pair_logit(std::span<const double> lambda, const UnembeddingMatrix& gamma, TokenId id1,
                  TokenId id0) {
  require(lambda.size() == gamma.dim(), ErrorCode::DimMismatch, "pair_logit: embedding dimension");
  const Vector diff = subtract(gamma.row(id1), gamma.row(id0));
  return simd::dot(lambda, diff);
}

double probe_score(const ConceptDirection& dir, std::span<const double> lambda) {
  require(lambda.size() == dir.gamma_bar.size(), ErrorCode::DimMismatch, "probe_score: dimension");
  return simd::dot(dir.gamma_bar, lambda);
}

double alpha_hat(const UnembeddingMatrix& gamma, TokenId id1, TokenId id0,
                 const ConceptDirection& dir, const MetricContext& mc) {
  const Vector diff = subtract(gamma.row(id1), gamma.row(id0));
  return cip(diff, dir.gamma_bar, mc);
}

double rank_auc(std::span<const double> negative, std::span<const double> positive) {
  require(!negative.empty() && !positive.empty(), ErrorCode::EmptyGroup, "AUC needs two non-empty groups");
  struct Entry {
    double score;
    bool positive;
  };
  std::vector<Entry> all;
  all.reserve(negative.size() + positive.size());
  for (double s : negative) all.push_back({s, false});
  for (double s : positive) all.push_back({s, true});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // Sum of (1-based, tie-averaged) ranks of the positive group.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    std::size_t positives = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      positives += all[j].positive ? 1 : 0;
      ++j;
    }
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    positive_rank_sum += mid_rank * static_cast<double>(positives);
    i = j;
  }
  const auto np = static_cast<double>(positive.size());
  const auto nn = static_cast<double>(negative.size());
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

EmbeddingSet select_label(const EmbeddingSet& set, std::string_view label) {
  require(set.labels.size() == set.size(), ErrorCode::InvalidArgument, "embedding set has no labels");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.labels[i] == label) keep.push_back(i);
  }
  EmbeddingSet out;
  out.vectors = Matrix(keep.size(), set.dim());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto src = set.vectors.row(keep[r]);
    std::copy(src.begin(), src.end(), out.vectors.row(r).begin());
    out.labels.push_back(set.labels[keep[r]]);
  }
  return out;
}

ProbeReport probe_report(const ConceptDirection& dir, const EmbeddingSet& contexts_a,
                         const EmbeddingSet& contexts_b) {
  require(contexts_a.size() > 0 && contexts_b.size() > 0, ErrorCode::EmptyGroup,
          "probe_report: both context groups must be non-empty");
  ProbeReport report;
  report.direction_name = dir.name;
  report.scores_a = score_rows(dir, contexts_a);
  report.scores_b = score_rows(dir, contexts_b);
  report.auc = rank_auc(report.scores_a, report.scores_b);
  return report;
}

}  // namespace cg
