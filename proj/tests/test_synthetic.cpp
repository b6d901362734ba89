#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cg/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cg;

namespace {

SyntheticSpec exact_spec() {
  SyntheticSpec s;
  s.noise_sigma = 0.0;
  return s;
}

Vector vals(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

double rel_max_diff(const Matrix& a, const Matrix& b) {
  return oracle::max_abs_diff(a, b) / std::max(max_abs(b), 1e-300);
}

}  // namespace

TEST(SyntheticSpec, Validation) {
  const auto bad = [](auto mutate) {
    SyntheticSpec s;
    mutate(s);
    return s;
  };
  EXPECT_NO_THROW(SyntheticSpec{}.validate());
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.dim = 0; }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.n_concepts = 0; }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.n_concepts = 17; }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.vocab_per_cell = 0; }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.pairs_per_concept = 100000; }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.noise_sigma = -1; }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.delta_lo = 2; }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.max_condition = 0.5; }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.transform = Matrix::identity(3); }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(bad([](SyntheticSpec& s) { s.shift = Vector(2, 0.0); }).validate(), InvalidSpec);
  EXPECT_CG_ERROR(build_synthetic(bad([](SyntheticSpec& s) { s.dim = 0; })), InvalidSpec);
}

TEST(Synthetic, ShapesAndDeterminism) {
  const SyntheticModel a = build_synthetic(SyntheticSpec{});
  EXPECT_EQ(a.gamma.vocab_size(), 256u);
  EXPECT_EQ(a.gamma.dim(), 16u);
  EXPECT_EQ(a.pair_sets.size(), 4u);
  EXPECT_EQ(a.concept_names, (std::vector<std::string>{"c0", "c1", "c2", "c3"}));
  EXPECT_EQ(a.probe_contexts.size(), 1000u);
  EXPECT_EQ(a.intervention_contexts.size(), 3u);
  EXPECT_EQ(a.quads.size(), 6u);

  const SyntheticModel b = build_synthetic(SyntheticSpec{});
  EXPECT_EQ(vals(a.gamma.matrix()), vals(b.gamma.matrix()));
  EXPECT_EQ(vals(a.probe_contexts.vectors), vals(b.probe_contexts.vectors));

  SyntheticSpec s1;
  s1.seed = 1;
  EXPECT_NE(vals(build_synthetic(s1).gamma.matrix()), vals(a.gamma.matrix()));

  SyntheticSpec filler;
  filler.filler_ratio = 8;
  EXPECT_EQ(build_synthetic(filler).gamma.vocab_size(), 256u * 9u);
}

TEST(Synthetic, TokensAndPairsFlipOneConcept) {
  const SyntheticModel m = build_synthetic(exact_spec());
  EXPECT_CG_ERROR(m.token(m.n_cells(), 0), IdOutOfRange);
  EXPECT_CG_ERROR(m.token(0, m.spec.vocab_per_cell), IdOutOfRange);
  for (std::size_t i = 0; i < m.pair_sets.size(); ++i) {
    m.pair_sets[i].validate(m.gamma.vocab_size());
    for (const auto& p : m.pair_sets[i].pairs) {
      for (std::size_t c = 0; c < m.spec.dim; ++c) {
        const double diff = m.latent(p.id1, c) - m.latent(p.id0, c);
        if (c == i) {
          EXPECT_GE(diff, m.spec.delta_lo - 1e-12);
          EXPECT_LE(diff, m.spec.delta_hi + 1e-12);
        } else {
          EXPECT_EQ(diff, 0.0) << "concept " << i << " coordinate " << c;
        }
      }
    }
  }
}

TEST(Synthetic, QuadsAreFactorial) {
  const SyntheticModel m = build_synthetic(exact_spec());
  for (const auto& q : m.quads) {
    q.validate(m.gamma.vocab_size());
    const auto wi = std::stoul(q.w_name.substr(1)), zi = std::stoul(q.z_name.substr(1));
    const auto coord = [&](TokenId t, std::size_t c) { return m.latent(t, c); };
    EXPECT_GT(coord(q.y10(), wi), coord(q.y00(), wi));
    EXPECT_EQ(coord(q.y10(), zi), coord(q.y00(), zi));
    EXPECT_GT(coord(q.y01(), zi), coord(q.y00(), zi));
    EXPECT_EQ(coord(q.y01(), wi), coord(q.y00(), wi));
    EXPECT_GT(coord(q.y11(), wi), coord(q.y01(), wi));
  }
  EXPECT_EQ(m.quads.front().w_name, "c0");
  EXPECT_EQ(m.quads.front().z_name, "c1");
}

TEST(Synthetic, TransformRespectsConditionCap) {
  const SyntheticModel m = build_synthetic(SyntheticSpec{});
  const double cond = condition_number(m.transform);
  EXPECT_LE(cond, m.spec.max_condition * (1 + 1e-9));
  EXPECT_GT(cond, m.spec.max_condition * 0.99);
  EXPECT_LT(oracle::max_abs_diff(oracle::matmul(m.transform, m.transform_inv), Matrix::identity(16)), 1e-10);

  std::mt19937_64 r1(5), r2(5);
  EXPECT_EQ(vals(random_transform(6, 10.0, r1)), vals(random_transform(6, 10.0, r2)));
  std::mt19937_64 r3(6);
  EXPECT_NEAR(condition_number(random_transform(6, 10.0, r3)), 10.0, 1e-6);
  EXPECT_CG_ERROR(random_transform(0, 10.0, r3), InvalidArgument);
  EXPECT_CG_ERROR(random_transform(3, 0.5, r3), InvalidArgument);
}

TEST(Synthetic, ObservedIsAffineImageOfLatent) {
  const SyntheticModel m = build_synthetic(SyntheticSpec{});
  for (TokenId y : {0u, 17u, 255u}) {
    const Vector lat(m.latent.row(y).begin(), m.latent.row(y).end());
    const Vector expect = add(oracle::matvec(m.transform, lat), m.shift);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(m.gamma.row(y)[j], expect[j], 1e-10 * (1 + std::abs(expect[j])));
  }
}

TEST(Synthetic, FixedTransformAndShiftAreUsed) {
  SyntheticSpec s;
  s.dim = 5;
  s.n_concepts = 2;
  std::mt19937_64 rng(7);
  s.transform = oracle::random_invertible(5, 20.0, rng);
  s.shift = oracle::random_vector(5, rng);
  const SyntheticModel m = build_synthetic(s);
  EXPECT_EQ(vals(m.transform), vals(*s.transform));
  EXPECT_EQ(m.shift, *s.shift);
}

TEST(GroundTruth, MatchesOracleCovarianceWhenExact) {
  const SyntheticModel m = build_synthetic(exact_spec());
  const GroundTruth& t = ground_truth(m);
  const Matrix cov = oracle::covariance(m.gamma.matrix());
  EXPECT_LT(rel_max_diff(t.metric_true, oracle::inverse(cov)), 1e-8);
  const Matrix lat_cov = oracle::covariance(m.latent);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j)
      if (i != j) {
        EXPECT_NEAR(lat_cov(i, j), 0.0, 1e-10);
      }
}

TEST(GroundTruth, CanonicalPairing) {
  const SyntheticModel m = build_synthetic(SyntheticSpec{});
  const GroundTruth& t = m.truth;
  ASSERT_EQ(t.gamma_bars.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(oracle::cip(t.gamma_bars[i], t.gamma_bars[i], t.metric_true), 1.0, 1e-10);
    const Vector l = oracle::matvec(t.metric_true, t.gamma_bars[i]);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(t.lambda_bars[i][j], l[j], 1e-8 * (1 + std::abs(l[j])));
    for (std::size_t k = 0; k < 4; ++k)
      EXPECT_NEAR(oracle::dot(t.lambda_bars[i], t.gamma_bars[k]), i == k ? 1.0 : 0.0, 1e-9);
  }
  // planted basis G satisfies G^T M G = I
  const Matrix g = t.planted_basis;
  EXPECT_LT(oracle::max_abs_diff(oracle::matmul(oracle::transpose(g), oracle::matmul(t.metric_true, g)),
                                 Matrix::identity(16)),
            1e-8);
}

TEST(Reparameterize, DirectionsMoveCovariantly) {
  std::mt19937_64 rng(500);
  const SyntheticModel m = build_synthetic(SyntheticSpec{});
  const Matrix a0 = oracle::random_invertible(16, 50.0, rng);
  const Vector b0 = oracle::random_vector(16, rng);
  const SyntheticModel r = reparameterize(m, a0, b0);
  const MetricContext mc = causal_metric(m.gamma, 0.0), rc = causal_metric(r.gamma, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    const Vector g = estimate_direction(m.gamma, m.pair_sets[i], mc).gamma_bar;
    const Vector gr = estimate_direction(r.gamma, r.pair_sets[i], rc).gamma_bar;
    const Vector expect = oracle::matvec(a0, g);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(gr[j], expect[j], 1e-6 * norm(expect));
    const Vector tb = oracle::matvec(a0, m.truth.gamma_bars[i]);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(r.truth.gamma_bars[i][j], tb[j], 1e-8 * norm(tb));
  }
  // context embeddings move contravariantly, so logits are unchanged
  const Vector l0(m.probe_contexts.vectors.row(0).begin(), m.probe_contexts.vectors.row(0).end());
  const Vector l1(r.probe_contexts.vectors.row(0).begin(), r.probe_contexts.vectors.row(0).end());
  const Vector dg0 = subtract(m.gamma.row(5), m.gamma.row(9));
  const Vector dg1 = subtract(r.gamma.row(5), r.gamma.row(9));
  EXPECT_NEAR(oracle::dot(l1, dg1), oracle::dot(l0, dg0), 1e-8 * (1 + std::abs(oracle::dot(l0, dg0))));
  EXPECT_CG_ERROR(transform_unembeddings(m.gamma, Matrix::identity(3), Vector(3, 0.0)), DimMismatch);
  EXPECT_CG_ERROR(transform_unembeddings(m.gamma, a0, Vector(3, 0.0)), DimMismatch);
  EXPECT_CG_ERROR(transform_embeddings(m.probe_contexts, Matrix::identity(3)), DimMismatch);
}

TEST(Uncorrelatedness, MatchesPearsonOracle) {
  std::mt19937_64 rng(501);
  const UnembeddingMatrix g(oracle::random_matrix(40, 5, rng));
  const Vector la = oracle::random_vector(5, rng), lb = oracle::random_vector(5, rng);
  std::vector<double> sa, sb;
  for (TokenId y = 0; y < 40; ++y) {
    const Vector row(g.row(y).begin(), g.row(y).end());
    sa.push_back(oracle::dot(la, row));
    sb.push_back(oracle::dot(lb, row));
  }
  EXPECT_NEAR(uncorrelatedness_check(g, la, lb), oracle::pearson(sa, sb), 1e-10);
  EXPECT_NEAR(uncorrelatedness_check(g, la, la), 1.0, 1e-12);
  EXPECT_CG_ERROR(uncorrelatedness_check(g, la, Vector(5, 0.0)), ZeroVariance);
  EXPECT_CG_ERROR(uncorrelatedness_check(g, la, Vector(4, 1.0)), DimMismatch);
  EXPECT_CG_ERROR(uncorrelatedness_check(UnembeddingMatrix(Matrix{{1, 0}, {0, 1}}), Vector{1, 0}, Vector{0, 1}),
                  DegenerateVocab);
}

TEST(Uncorrelatedness, PlantedConceptsUncorrelatedOverlapCorrelated) {
  const SyntheticModel m = build_synthetic(SyntheticSpec{});
  const MetricContext mc = causal_metric(m.gamma);
  const auto dirs = estimate_concepts(m, mc);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b)
      EXPECT_LT(std::abs(uncorrelatedness_check(m.gamma, dirs[a].lambda_bar, dirs[b].lambda_bar)), 0.05);

  const ConceptPairSet both = overlapping_pairs(m, 0, 1);
  EXPECT_EQ(both.name, "c0+c1");
  both.validate(m.gamma.vocab_size());
  const ConceptDirection ob = estimate_direction(m.gamma, both, mc);
  EXPECT_GT(std::abs(uncorrelatedness_check(m.gamma, ob.lambda_bar, dirs[0].lambda_bar)), 0.5);
  EXPECT_GT(std::abs(cip(ob.gamma_bar, dirs[0].gamma_bar, mc)), 0.5);
  EXPECT_CG_ERROR(overlapping_pairs(m, 0, 0), InvalidArgument);
  EXPECT_CG_ERROR(overlapping_pairs(m, 0, 4), InvalidArgument);
}

TEST(VerifyReport, DefaultModelPasses) {
  const SyntheticModel m = build_synthetic(SyntheticSpec{});
  const VerifyReport r = verify_report(m, causal_metric(m.gamma));
  ASSERT_EQ(r.dir_cos.size(), 4u);
  for (double c : r.dir_cos) EXPECT_GT(c, 0.99);
  for (double c : r.riesz_cos) EXPECT_GT(c, 0.99);
  EXPECT_LT(r.heatmap_offdiag_max, 0.05);
  EXPECT_GT(r.euclidean_offdiag_median, 0.2);
  EXPECT_LT(r.uncorrelatedness_max, 0.05);
}

TEST(VerifyReport, ExactModelIsExact) {
  const SyntheticModel m = build_synthetic(exact_spec());
  const VerifyReport r = verify_report(m, causal_metric(m.gamma, 0.0));
  for (double c : r.dir_cos) EXPECT_GT(c, 1 - 1e-8);
  for (double c : r.riesz_cos) EXPECT_GT(c, 1 - 1e-8);
  EXPECT_LT(r.heatmap_offdiag_max, 1e-8);
  EXPECT_LT(r.explicit_offdiag_rel, 1e-6);
  EXPECT_LT(r.explicit_m_residual, 1e-6);
}

TEST(VerifyReport, HeavyNoiseDegrades) {
  SyntheticSpec s;
  s.noise_sigma = 10.0;
  const SyntheticModel m = build_synthetic(s);
  const VerifyReport r = verify_report(m, causal_metric(m.gamma));
  EXPECT_LT(*std::min_element(r.dir_cos.begin(), r.dir_cos.end()), 0.99);
}
