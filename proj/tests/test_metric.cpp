#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cg/concepts.hpp"
#include "cg/kernels.hpp"
#include "cg/metric.hpp"
#include "cg/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cg;

namespace {

MetricContext from_unembeddings(const Matrix& g, double ridge = 0.0) {
  return causal_metric(UnembeddingMatrix(g), ridge);
}

ConceptDirection named(std::string name, Vector g) {
  ConceptDirection d;
  d.name = std::move(name);
  d.gamma_bar = std::move(g);
  return d;
}

}  // namespace

TEST(VocabCovariance, IdenticalRowsGiveZero) {
  const VocabMoments m = vocab_covariance(UnembeddingMatrix(Matrix{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  EXPECT_EQ(m.mean, (Vector{1, 2, 3}));
  EXPECT_EQ(max_abs(m.cov), 0.0);
}

TEST(VocabCovariance, FourCornerSquare) {
  const VocabMoments m = vocab_covariance(UnembeddingMatrix(Matrix{{0, 0}, {2, 0}, {0, 2}, {2, 2}}));
  EXPECT_EQ(m.mean, (Vector{1, 1}));
  EXPECT_EQ(m.cov, Matrix::identity(2));
}

TEST(VocabCovariance, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(100);
  for (std::size_t d : {1, 3, 4, 7, 16}) {
    const Matrix g = oracle::random_matrix(100, d, rng, 2.0);
    const VocabMoments m = vocab_covariance(UnembeddingMatrix(g));
    EXPECT_LT(oracle::max_abs_diff(m.cov, oracle::covariance(g)), 1e-12) << "d=" << d;
    EXPECT_EQ(m.cov, transpose(m.cov));
  }
}

TEST(VocabCovariance, EveryIsaGivesTheSameCovariance) {
  std::mt19937_64 rng(101);
  const UnembeddingMatrix g(oracle::random_matrix(257, 13, rng));
  simd::force_isa(simd::Isa::Scalar);
  const Matrix ref = vocab_covariance(g).cov;
  for (auto isa : simd::available_isas()) {
    simd::force_isa(isa);
    EXPECT_LT(oracle::max_abs_diff(vocab_covariance(g).cov, ref), 1e-13) << simd::isa_name(isa);
  }
  simd::reset_isa();
}

TEST(CausalMetric, IdentityCovariance) {
  const MetricContext mc = causal_metric(Matrix::identity(3), 0.0);
  EXPECT_LT(oracle::max_abs_diff(mc.metric, Matrix::identity(3)), 1e-15);
  EXPECT_LT(oracle::max_abs_diff(mc.whitening, Matrix::identity(3)), 1e-15);
  EXPECT_EQ(mc.ridge, 0.0);
}

TEST(CausalMetric, DiagonalClosedForm) {
  const MetricContext mc = causal_metric(Matrix{{4, 0}, {0, 1}}, 0.0);
  EXPECT_LT(oracle::max_abs_diff(mc.metric, Matrix{{0.25, 0}, {0, 1}}), 1e-15);
  EXPECT_LT(oracle::max_abs_diff(mc.whitening, Matrix{{0.5, 0}, {0, 1}}), 1e-15);
}

TEST(CausalMetric, RankDeficientNeedsRidge) {
  std::mt19937_64 rng(102);
  const std::size_t d = 6;
  Matrix cov(d, d, 0.0);
  for (std::size_t r = 0; r + 1 < d; ++r) {
    const Vector v = oracle::random_vector(d, rng);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov(i, j) += v[i] * v[j];
  }
  EXPECT_CG_ERROR(causal_metric(cov, 0.0), SingularAfterRidge);
  const MetricContext mc = causal_metric(cov, 1e-6);
  EXPECT_TRUE(all_finite(mc.metric.values()));
  EXPECT_DOUBLE_EQ(mc.ridge_rel, 1e-6);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
  EXPECT_NEAR(mc.ridge, 1e-6 * trace / d, 1e-20);
  for (double e : mc.cov_eigenvalues) EXPECT_GT(e, 0.0);
  const Matrix check = oracle::matmul(mc.metric, add(cov, Matrix::diagonal(Vector(d, mc.ridge))));
  EXPECT_LT(oracle::max_abs_diff(check, Matrix::identity(d)), 1e-6);
}

TEST(CausalMetric, InvariantsOnRandomCovariance) {
  std::mt19937_64 rng(103);
  const Matrix g = oracle::random_matrix(200, 9, rng);
  const MetricContext mc = from_unembeddings(g, 1e-6);
  EXPECT_LT(oracle::max_abs_diff(mc.metric, transpose(mc.metric)), 1e-10 * max_abs(mc.metric));
  EXPECT_LT(oracle::max_abs_diff(oracle::matmul(mc.whitening, mc.whitening), mc.metric), 1e-8 * max_abs(mc.metric));
  const Matrix oracle_metric = oracle::inverse(oracle::covariance(g));
  EXPECT_LT(oracle::max_abs_diff(mc.metric, oracle_metric), 1e-4 * max_abs(oracle_metric));
}

TEST(CausalMetric, RejectsBadInput) {
  EXPECT_CG_ERROR(causal_metric(Matrix(2, 3, 0.0), 0.0), NotSquare);
  EXPECT_CG_ERROR(causal_metric(Matrix::identity(2), -1.0), InvalidArgument);
}

TEST(Cip, DiagonalExamplesAndPositivity) {
  const MetricContext mc = causal_metric(Matrix{{4, 0}, {0, 1}}, 0.0);
  EXPECT_EQ(cip(Vector{2, 0}, Vector{0, 3}, mc), 0.0);
  EXPECT_NEAR(cip(Vector{2, 0}, Vector{2, 0}, mc), 1.0, 1e-15);
  EXPECT_EQ(cip(Vector{0, 0}, Vector{0, 0}, mc), 0.0);
  EXPECT_CG_ERROR(cip(Vector{1}, Vector{1, 2}, mc), DimMismatch);
}

TEST(Cip, SymmetricBilinearPositiveDefinite) {
  std::mt19937_64 rng(104);
  const Matrix g = oracle::random_matrix(80, 5, rng);
  const MetricContext mc = from_unembeddings(g);
  const Matrix m = oracle::inverse(oracle::covariance(g));
  for (int t = 0; t < 100; ++t) {
    const Vector u = oracle::random_vector(5, rng), v = oracle::random_vector(5, rng), w = oracle::random_vector(5, rng);
    const double uv = cip(u, v, mc);
    EXPECT_NEAR(uv, cip(v, u, mc), 1e-12 * (1 + std::abs(uv)));
    EXPECT_NEAR(uv, oracle::cip(u, v, m), 1e-8 * (1 + std::abs(uv)));
    EXPECT_NEAR(cip(add(u, scaled(w, 2.0)), v, mc), uv + 2.0 * cip(w, v, mc), 1e-10 * (1 + std::abs(uv)));
    EXPECT_GT(cip(u, u, mc), 0.0);
  }
}

TEST(RieszMap, DiagonalExampleAndCanonicalPairing) {
  const MetricContext mc = causal_metric(Matrix{{4, 0}, {0, 1}}, 0.0);
  const Vector l = riesz_map(Vector{2, 2}, mc);
  EXPECT_NEAR(l[0], 0.5, 1e-15);
  EXPECT_NEAR(l[1], 2.0, 1e-15);
  const MetricContext id = causal_metric(Matrix::identity(3), 0.0);
  EXPECT_EQ(riesz_map(Vector{1, -2, 3}, id), (Vector{1, -2, 3}));

  std::mt19937_64 rng(105);
  const MetricContext mr = from_unembeddings(oracle::random_matrix(60, 4, rng));
  const Vector g = oracle::random_vector(4, rng);
  const Vector canon = scaled(g, 1.0 / causal_norm(g, mr));
  EXPECT_NEAR(oracle::dot(riesz_map(canon, mr), canon), 1.0, 1e-10);
}

TEST(DualCip, PreservesInnerProductsOfRieszImages) {
  std::mt19937_64 rng(106);
  const MetricContext mc = from_unembeddings(oracle::random_matrix(60, 4, rng));
  const Vector a = oracle::random_vector(4, rng), b = oracle::random_vector(4, rng);
  EXPECT_NEAR(dual_cip(riesz_map(a, mc), riesz_map(b, mc), mc), cip(a, b, mc), 1e-9 * (1 + std::abs(cip(a, b, mc))));
}

TEST(Whiten, IdentityAndInnerProducts) {
  const MetricContext id = causal_metric(Matrix::identity(2), 0.0);
  EXPECT_EQ(whiten(Vector{3, -1}, id), (Vector{3, -1}));
  const Matrix m{{1, 2}, {3, 4}};
  EXPECT_EQ(whiten_matrix(whiten_matrix(m, id), id), m);

  std::mt19937_64 rng(107);
  const MetricContext mc = from_unembeddings(oracle::random_matrix(50, 6, rng), 1e-6);
  for (int t = 0; t < 100; ++t) {
    const Vector u = oracle::random_vector(6, rng), v = oracle::random_vector(6, rng);
    const double want = cip(u, v, mc);
    EXPECT_NEAR(oracle::dot(whiten(u, mc), whiten(v, mc)), want, 1e-8 * std::max(1.0, std::abs(want)));
  }
  EXPECT_CG_ERROR(whiten(Vector{1, 2}, mc), DimMismatch);
}

TEST(Whiten, WhitenedCenteredUnembeddingsHaveIdentityCovariance) {
  std::mt19937_64 rng(108);
  const Matrix g = oracle::matmul(oracle::random_matrix(300, 8, rng), oracle::random_invertible(8, 50.0, rng));
  const MetricContext mc = from_unembeddings(g, 0.0);
  const Matrix w = whiten_matrix(g, mc);
  EXPECT_LT(oracle::max_abs_diff(oracle::covariance(w), Matrix::identity(8)), 1e-6);
}

TEST(Heatmap, SingleDirectionAndOrthogonalPair) {
  const MetricContext mc = causal_metric(Matrix{{4, 0}, {0, 1}}, 0.0);
  std::vector<ConceptDirection> one{named("a", {1, 1})};
  const Matrix h1 = heatmap(std::span<const ConceptDirection>(one), mc, MetricKind::Causal);
  ASSERT_EQ(h1.rows(), 1u);
  EXPECT_NEAR(h1(0, 0), 1.0, 1e-10);

  std::vector<ConceptDirection> two{named("a", {2, 0}), named("b", {0, 3})};
  const Matrix h2 = heatmap(std::span<const ConceptDirection>(two), mc, MetricKind::Causal);
  EXPECT_NEAR(h2(0, 1), 0.0, 1e-10);
  EXPECT_NEAR(h2(1, 1), 1.0, 1e-10);
}

TEST(Heatmap, EuclideanAndCausalDifferUnderSkewedMetric) {
  const MetricContext mc = causal_metric(Matrix{{1, 0.9}, {0.9, 1}}, 0.0);
  std::vector<Vector> dirs{{1, 0}, {0, 1}};
  EXPECT_NEAR(heatmap(std::span<const Vector>(dirs), mc, MetricKind::Euclidean)(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(heatmap(std::span<const Vector>(dirs), mc, MetricKind::Causal)(0, 1), 0.9, 1e-9);
}

TEST(Heatmap, SignIsDiscardedAndDiagonalIsOne) {
  std::mt19937_64 rng(109);
  const MetricContext mc = from_unembeddings(oracle::random_matrix(40, 3, rng));
  std::vector<Vector> dirs{{1, 2, 3}, {-1, -2, -3}, {0.5, 0, 1}};
  const Matrix h = heatmap(std::span<const Vector>(dirs), mc, MetricKind::Causal);
  EXPECT_NEAR(h(0, 1), 1.0, 1e-10);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(h(i, i), 1.0, 1e-10);
}

TEST(MetricKindNames, ParseAndPrint) {
  EXPECT_EQ(parse_metric_kind("causal"), MetricKind::Causal);
  EXPECT_EQ(parse_metric_kind("euclidean"), MetricKind::Euclidean);
  EXPECT_EQ(metric_kind_name(MetricKind::Euclidean), "euclidean");
  EXPECT_CG_ERROR(parse_metric_kind("cosine"), InvalidArgument);
}

TEST(ExplicitForm, IdentityBasis) {
  const ExplicitFormReport r = explicit_form_check(Matrix::identity(3), Matrix::identity(3));
  EXPECT_EQ(r.offdiag_rel, 0.0);
  EXPECT_EQ(r.d_entries, (Vector{1, 1, 1}));
  EXPECT_EQ(r.m_residual, 0.0);
}

TEST(ExplicitForm, RepeatedColumnFlagsFailure) {
  const Matrix g{{1, 1, 0}, {0, 0, 1}, {0, 0, 0}};
  const ExplicitFormReport r = explicit_form_check(g, Matrix::identity(3));
  EXPECT_NEAR(r.offdiag_rel, 1.0, 1e-12);
  EXPECT_CG_ERROR(explicit_form_check(Matrix(2, 3, 1.0), Matrix::identity(2)), NotSquare);
}

TEST(ExplicitForm, PlantedSyntheticBasisSatisfiesIt) {
  SyntheticSpec spec;
  spec.noise_sigma = 0.0;
  const SyntheticModel m = build_synthetic(spec);
  const MetricContext mc = causal_metric(m.gamma, 0.0);
  const ExplicitFormReport r = explicit_form_check(m.truth.planted_basis, mc.cov);
  EXPECT_LT(r.offdiag_rel, 1e-6);
  EXPECT_LT(r.m_residual, 1e-6);
  for (double e : r.d_entries) EXPECT_GT(e, 0.0);
}

TEST(Reparameterization, CipAndRieszTransformAsExpected) {
  std::mt19937_64 rng(110);
  const UnembeddingMatrix g(oracle::random_matrix(120, 6, rng));
  const MetricContext mc = causal_metric(g, 0.0);
  for (int t = 0; t < 5; ++t) {
    const Matrix a0 = oracle::random_invertible(6, 100.0, rng);
    const Vector beta = oracle::random_vector(6, rng);
    const UnembeddingMatrix g2 = transform_unembeddings(g, a0, beta);
    const MetricContext mc2 = causal_metric(g2, 0.0);
    const Matrix a0_inv_t = oracle::transpose(oracle::inverse(a0));
    for (int s = 0; s < 10; ++s) {
      const Vector u = oracle::random_vector(6, rng), v = oracle::random_vector(6, rng);
      const double want = cip(u, v, mc);
      const double scale = causal_norm(u, mc) * causal_norm(v, mc);
      EXPECT_LT(oracle::rel_diff(cip(oracle::matvec(a0, u), oracle::matvec(a0, v), mc2), want, scale), 1e-6);
      const Vector r1 = riesz_map(u, mc);
      const Vector r2 = riesz_map(oracle::matvec(a0, u), mc2);
      const Vector expect = oracle::matvec(a0_inv_t, r1);
      EXPECT_LT(norm(subtract(r2, expect)), 1e-6 * norm(expect));
    }
  }
}
