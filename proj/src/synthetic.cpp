#include "cg/synthetic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cg/error.hpp"
#include "cg/kernels.hpp"

namespace cg {
namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kMaxConcepts = 20;
constexpr double kCollapseTol = 1e-10;

std::string concept_name(std::size_t i) { return "c" + std::to_string(i); }

Matrix to_matrix(const EMat& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  std::copy(m.data(), m.data() + m.size(), out.values().begin());
  return out;
}

EMat random_orthogonal(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  EMat g(d, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  Eigen::HouseholderQR<EMat> qr(g);
  EMat q = qr.householderQ();
  const EMat r = qr.matrixQR();
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (r(c, c) < 0) q.col(c) *= -1.0;
  }
  return q;
}

// Offsets of the J family rows (weight 2^k each) and the filler rows (weight
// 1), with columns made mutually orthogonal and zero-mean under the token
// weighting. Background columns are processed first so that a rank shortfall
// lands on the concept jitter rather than on the background.
EMat decorrelated_offsets(const SyntheticSpec& spec, std::size_t n_rows, double family_weight,
                          std::mt19937_64& rng) {
  const std::size_t d = spec.dim;
  const std::size_t k = spec.n_concepts;
  const std::size_t J = spec.vocab_per_cell;
  std::normal_distribution<double> normal;
  EMat r(n_rows, d);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = normal(rng);

  Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_rows));
  w.head(static_cast<Eigen::Index>(J)).setConstant(family_weight);
  w /= w.sum();

  for (Eigen::Index c = 0; c < r.cols(); ++c) r.col(c).array() -= w.dot(r.col(c));

  std::vector<std::size_t> order;
  for (std::size_t l = k; l < d; ++l) order.push_back(l);
  for (std::size_t l = 0; l < k; ++l) order.push_back(l);

  std::vector<std::size_t> done;
  for (std::size_t l : order) {
    auto col = r.col(static_cast<Eigen::Index>(l));
    const double before = std::sqrt(w.dot(col.cwiseProduct(col)));
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p : done) {
        const auto prev = r.col(static_cast<Eigen::Index>(p));
        col -= w.dot(col.cwiseProduct(prev)) * prev;
      }
    }
    const double after = std::sqrt(w.dot(col.cwiseProduct(col)));
    if (after <= kCollapseTol * before) {
      require(l < k, ErrorCode::InvalidSpec,
              "too few families and filler tokens for " + std::to_string(d - k) + " background coordinates");
      col.setZero();
      continue;
    }
    col /= after;
    done.push_back(l);
  }
  for (std::size_t l = 0; l < d; ++l) {
    r.col(static_cast<Eigen::Index>(l)) *= (l < k) ? spec.concept_jitter : spec.background_scale;
  }
  return r;
}

struct KingChoice {
  std::size_t family = 0;
  double gap = 0.0;
};

// Family whose whitened background separates best, by the worst-case
// matched-filter margin against every token outside the family.
KingChoice choose_king_family(const SyntheticModel& m, const EMat& offsets) {
  const std::size_t d = m.spec.dim;
  const std::size_t k = m.spec.n_concepts;
  const std::size_t C = m.n_cells();
  const std::size_t V = m.latent.rows();
  KingChoice best{0, -std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j < m.spec.vocab_per_cell; ++j) {
    double uu = 0.0;
    for (std::size_t l = k; l < d; ++l) {
      const double u = offsets(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) / m.truth.latent_sd[l];
      uu += u * u;
    }
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < V; ++t) {
      if (t / C == j && t < m.factorial_tokens()) continue;
      double uz = 0.0;
      for (std::size_t l = k; l < d; ++l) {
        const double sd = m.truth.latent_sd[l];
        uz += offsets(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) / sd * m.latent(t, l) / sd;
      }
      gap = std::min(gap, uu - uz);
    }
    if (gap > best.gap) best = {j, gap};
  }
  return best;
}

ConceptQuadruple make_quad(const SyntheticModel& m, std::size_t w, std::size_t z, std::size_t family) {
  const std::size_t bw = std::size_t{1} << w;
  const std::size_t bz = std::size_t{1} << z;
  ConceptQuadruple q;
  q.w_name = m.concept_names[w];
  q.z_name = m.concept_names[z];
  q.ids = {m.token(0, family), m.token(bz, family), m.token(bw, family), m.token(bw | bz, family)};
  return q;
}

// Latent context vectors: background matched to the king family, concept
// coordinates placing the c0 flip at alpha* in [0.1, 0.2].
Matrix king_contexts(const SyntheticModel& m, const EMat& offsets, const KingChoice& king,
                     const std::vector<std::vector<double>>& delta) {
  const std::size_t d = m.spec.dim;
  const std::size_t k = m.spec.n_concepts;
  const std::size_t n = m.spec.intervention_contexts;
  const std::size_t V = m.latent.rows();
  const Vector& sd = m.truth.latent_sd;
  const std::size_t j = king.family;
  const double d0 = delta[j][0];

  Vector range(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double lo = m.latent(0, i), hi = lo;
    for (std::size_t t = 1; t < V; ++t) {
      lo = std::min(lo, m.latent(t, i));
      hi = std::max(hi, m.latent(t, i));
    }
    range[i] = std::max(std::abs(lo), std::abs(hi));
  }

  Matrix out(n, d, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    const double a_star = n == 1 ? 0.15 : 0.1 + 0.1 * static_cast<double>(c) / static_cast<double>(n - 1);
    const double q = 0.2 * (0.4 - a_star) * d0 / (sd[0] * static_cast<double>(k - 1));
    out(c, 0) = -a_star / sd[0];
    for (std::size_t i = 1; i < k; ++i) out(c, i) = -q / delta[j][i];

    double span = 0.4 * range[0] / sd[0];
    for (std::size_t i = 0; i < k; ++i) span += std::abs(out(c, i)) * range[i];
    const double kappa = 4.0 * span / king.gap;
    for (std::size_t l = k; l < d; ++l) {
      out(c, l) = kappa * offsets(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) / (sd[l] * sd[l]);
    }
  }
  return out;
}

// Rows l -> A^{-T} l, i.e. row * A^{-1}.
Matrix pull_back(const Matrix& latent_rows, const Matrix& a_inv) { return matmul(latent_rows, a_inv); }

}  // namespace

void SyntheticSpec::validate() const {
  require(dim >= 1, ErrorCode::InvalidSpec, "dim must be positive");
  require(n_concepts >= 1 && n_concepts <= std::min(dim, kMaxConcepts), ErrorCode::InvalidSpec,
          "n_concepts must lie in [1, min(dim, " + std::to_string(kMaxConcepts) + ")]");
  require(vocab_per_cell >= 1, ErrorCode::InvalidSpec, "vocab_per_cell must be positive");
  const std::size_t available = vocab_per_cell << (n_concepts - 1);
  require(pairs_per_concept <= available, ErrorCode::InvalidSpec,
          "pairs_per_concept = " + std::to_string(pairs_per_concept) + " exceeds the " +
              std::to_string(available) + " available pairs");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, ErrorCode::InvalidSpec, "noise_sigma must be >= 0");
  require(std::isfinite(delta_lo) && std::isfinite(delta_hi) && delta_lo > 0.0 && delta_hi >= delta_lo,
          ErrorCode::InvalidSpec, "need 0 < delta_lo <= delta_hi");
  require(std::isfinite(concept_jitter) && concept_jitter >= 0.0, ErrorCode::InvalidSpec,
          "concept_jitter must be >= 0");
  require(std::isfinite(background_scale) && background_scale > 0.0, ErrorCode::InvalidSpec,
          "background_scale must be > 0");
  require(std::isfinite(max_condition) && max_condition >= 1.0, ErrorCode::InvalidSpec,
          "max_condition must be >= 1");
  if (transform) {
    require(transform->rows() == dim && transform->cols() == dim, ErrorCode::InvalidSpec,
            "transform must be dim x dim");
    require(all_finite(transform->values()), ErrorCode::InvalidSpec, "transform has non-finite entries");
  }
  if (shift) {
    require(shift->size() == dim, ErrorCode::InvalidSpec, "shift must have dim entries");
    require(all_finite(*shift), ErrorCode::InvalidSpec, "shift has non-finite entries");
  }
}

TokenId SyntheticModel::token(std::size_t cell, std::size_t family) const {
  require(cell < n_cells() && family < spec.vocab_per_cell, ErrorCode::IdOutOfRange,
          "no factorial token for cell " + std::to_string(cell) + ", family " + std::to_string(family));
  return static_cast<TokenId>(family * n_cells() + cell);
}

Matrix random_transform(std::size_t d, double max_condition, std::mt19937_64& rng) {
  require(d >= 1, ErrorCode::InvalidArgument, "random_transform: d must be positive");
  require(max_condition >= 1.0, ErrorCode::InvalidArgument, "random_transform: max_condition must be >= 1");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const EMat q1 = random_orthogonal(d, rng);
    const EMat q2 = random_orthogonal(d, rng);
    // log_{max_condition} of the singular values: one dominant direction at 1,
    // the smallest pinned at 0, the rest uniform on [0, 1/2].
    std::vector<double> u(d);
    for (auto& x : u) x = 0.5 * unif(rng);
    u[0] = 0.0;
    if (d >= 2) u[d - 1] = 1.0;
    Eigen::VectorXd s(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) s[static_cast<Eigen::Index>(i)] = std::pow(max_condition, u[i]);
    const EMat a = q1 * s.asDiagonal() * q2.transpose();
    Matrix out = to_matrix(a);
    if (condition_number(out) <= max_condition * (1.0 + 1e-9)) return out;
  }
  fail(ErrorCode::InvalidArgument, "random_transform: could not meet the condition-number cap");
}

SyntheticModel build_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticModel m;
  m.spec = spec;
  const std::size_t d = spec.dim;
  const std::size_t k = spec.n_concepts;
  const std::size_t J = spec.vocab_per_cell;
  const std::size_t C = m.n_cells();
  const std::size_t F = C * J;
  const std::size_t n_fill = spec.filler_ratio * F;
  const std::size_t V = F + n_fill;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> gap_dist(spec.delta_lo, spec.delta_hi);

  const EMat offsets = decorrelated_offsets(spec, J + n_fill, static_cast<double>(C), rng);

  std::vector<std::vector<double>> delta(J, std::vector<double>(k));
  for (auto& row : delta) {
    for (auto& x : row) x = gap_dist(rng);
  }

  m.latent = Matrix(V, d);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t t = j * C + c;
      for (std::size_t l = 0; l < d; ++l) {
        double x = offsets(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
        if (l < k) {
          x += (static_cast<double>((c >> l) & 1U) - 0.5) * delta[j][l];
        } else if (spec.noise_sigma > 0.0) {
          x += spec.noise_sigma * normal(rng);
        }
        m.latent(t, l) = x;
      }
    }
  }
  for (std::size_t f = 0; f < n_fill; ++f) {
    for (std::size_t l = 0; l < d; ++l) {
      m.latent(F + f, l) = offsets(static_cast<Eigen::Index>(J + f), static_cast<Eigen::Index>(l));
    }
  }

  for (std::size_t i = 0; i < k; ++i) {
    m.concept_names.push_back(concept_name(i));
    std::vector<TokenPair> candidates;
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t c = 0; c < C; ++c) {
        if ((c >> i) & 1U) continue;
        candidates.push_back({m.token(c, j), m.token(c | (std::size_t{1} << i), j)});
      }
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    const std::size_t take = spec.pairs_per_concept == 0 ? candidates.size() : spec.pairs_per_concept;
    candidates.resize(take);
    m.pair_sets.push_back({m.concept_names.back(), std::move(candidates)});
  }

  m.transform = spec.transform ? *spec.transform : random_transform(d, spec.max_condition, rng);
  m.transform_inv = inverse(m.transform);
  if (spec.shift) {
    m.shift = *spec.shift;
  } else {
    m.shift.resize(d);
    for (auto& x : m.shift) x = normal(rng);
  }

  Matrix observed = matmul(m.latent, transpose(m.transform));
  for (std::size_t t = 0; t < V; ++t) {
    simd::axpy(1.0, m.shift, std::span<double>(observed.row(t)));
  }
  m.gamma = UnembeddingMatrix(std::move(observed));

  const VocabMoments moments = vocab_covariance(UnembeddingMatrix(m.latent));
  GroundTruth& truth = m.truth;
  truth.latent_sd.resize(d);
  Vector inv_var(d);
  for (std::size_t l = 0; l < d; ++l) {
    require(moments.cov(l, l) > 0.0, ErrorCode::InvalidSpec,
            "latent coordinate " + std::to_string(l) + " has zero variance");
    truth.latent_sd[l] = std::sqrt(moments.cov(l, l));
    inv_var[l] = 1.0 / moments.cov(l, l);
  }
  const Matrix a_inv_t = transpose(m.transform_inv);
  truth.metric_true = matmul(matmul(a_inv_t, Matrix::diagonal(inv_var)), m.transform_inv);
  truth.planted_basis = matmul(m.transform, Matrix::diagonal(truth.latent_sd));
  for (std::size_t i = 0; i < k; ++i) {
    truth.gamma_bars.push_back(truth.planted_basis.column(i));
    truth.lambda_bars.push_back(scaled(a_inv_t.column(i), 1.0 / truth.latent_sd[i]));
  }

  const std::size_t p = m.probe_concept;
  const std::size_t np = spec.probe_contexts_per_group;
  Matrix probe_latent(2 * np, d);
  for (std::size_t r = 0; r < 2 * np; ++r) {
    const double side = r < np ? -1.0 : 1.0;
    for (std::size_t l = 0; l < d; ++l) probe_latent(r, l) = normal(rng);
    probe_latent(r, p) = side * 3.0 * truth.latent_sd[p];
  }
  m.probe_contexts.vectors = pull_back(probe_latent, m.transform_inv);
  for (std::size_t r = 0; r < 2 * np; ++r) {
    m.probe_contexts.labels.push_back(m.concept_names[p] + (r < np ? ":0" : ":1"));
  }

  KingChoice king;
  const bool can_steer = k >= 2 && d > k;
  if (can_steer) king = choose_king_family(m, offsets);
  if (k >= 2) {
    m.quads.push_back(make_quad(m, 0, 1, king.family));
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        if (a == 0 && b == 1) continue;
        m.quads.push_back(make_quad(m, a, b, king.family));
      }
    }
  }
  if (can_steer && king.gap > 0.0 && spec.intervention_contexts > 0) {
    m.intervention_contexts.vectors = pull_back(king_contexts(m, offsets, king, delta), m.transform_inv);
  } else {
    m.intervention_contexts.vectors = Matrix(0, d);
  }
  return m;
}

const GroundTruth& ground_truth(const SyntheticModel& model) { return model.truth; }

UnembeddingMatrix transform_unembeddings(const UnembeddingMatrix& gamma, const Matrix& a0,
                                         std::span<const double> beta0) {
  require(a0.rows() == gamma.dim() && a0.cols() == gamma.dim(), ErrorCode::DimMismatch,
          "transform must be d x d");
  require(beta0.size() == gamma.dim(), ErrorCode::DimMismatch, "shift must have d entries");
  Matrix out = matmul(gamma.matrix(), transpose(a0));
  for (std::size_t t = 0; t < out.rows(); ++t) simd::axpy(1.0, beta0, std::span<double>(out.row(t)));
  return UnembeddingMatrix(std::move(out));
}

EmbeddingSet transform_embeddings(const EmbeddingSet& set, const Matrix& a0_inv) {
  require(a0_inv.rows() == set.dim() && a0_inv.cols() == set.dim(), ErrorCode::DimMismatch,
          "inverse transform must be d x d");
  EmbeddingSet out;
  out.vectors = set.size() == 0 ? Matrix(0, set.dim()) : pull_back(set.vectors, a0_inv);
  out.labels = set.labels;
  return out;
}

SyntheticModel reparameterize(const SyntheticModel& model, const Matrix& a0, std::span<const double> beta0) {
  const Matrix a0_inv = inverse(a0);
  const Matrix a0_inv_t = transpose(a0_inv);
  SyntheticModel out = model;
  out.gamma = transform_unembeddings(model.gamma, a0, beta0);
  out.transform = matmul(a0, model.transform);
  out.transform_inv = matmul(model.transform_inv, a0_inv);
  out.shift = add(matvec(a0, model.shift), beta0);
  out.spec.transform = out.transform;
  out.spec.shift = out.shift;
  out.probe_contexts = transform_embeddings(model.probe_contexts, a0_inv);
  out.intervention_contexts = transform_embeddings(model.intervention_contexts, a0_inv);
  GroundTruth& t = out.truth;
  for (auto& g : t.gamma_bars) g = matvec(a0, g);
  for (auto& l : t.lambda_bars) l = matvec(a0_inv_t, l);
  t.metric_true = matmul(matmul(a0_inv_t, model.truth.metric_true), a0_inv);
  t.planted_basis = matmul(a0, model.truth.planted_basis);
  return out;
}

ConceptPairSet overlapping_pairs(const SyntheticModel& model, std::size_t a, std::size_t b) {
  const std::size_t k = model.spec.n_concepts;
  require(a < k && b < k && a != b, ErrorCode::InvalidArgument, "overlapping_pairs needs two distinct concepts");
  const std::size_t mask = (std::size_t{1} << a) | (std::size_t{1} << b);
  ConceptPairSet set;
  set.name = model.concept_names[a] + "+" + model.concept_names[b];
  for (std::size_t j = 0; j < model.spec.vocab_per_cell; ++j) {
    for (std::size_t c = 0; c < model.n_cells(); ++c) {
      if (c & mask) continue;
      set.pairs.push_back({model.token(c, j), model.token(c | mask, j)});
    }
  }
  return set;
}

double uncorrelatedness_check(const UnembeddingMatrix& gamma, std::span<const double> lambda_a,
                              std::span<const double> lambda_b) {
  const std::size_t v = gamma.vocab_size();
  require(v >= 3, ErrorCode::DegenerateVocab, "correlation needs at least 3 tokens");
  require(lambda_a.size() == gamma.dim() && lambda_b.size() == gamma.dim(), ErrorCode::DimMismatch,
          "uncorrelatedness_check: embedding dimension");
  Vector sa(v), sb(v);
  simd::gemv(gamma.matrix().values(), v, gamma.dim(), lambda_a, sa);
  simd::gemv(gamma.matrix().values(), v, gamma.dim(), lambda_b, sb);
  const double n = static_cast<double>(v);
  const double ma = std::accumulate(sa.begin(), sa.end(), 0.0) / n;
  const double mb = std::accumulate(sb.begin(), sb.end(), 0.0) / n;
  double saa = 0.0, sbb = 0.0, sab = 0.0, qa = 0.0, qb = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    const double x = sa[i] - ma, y = sb[i] - mb;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
    qa += sa[i] * sa[i];
    qb += sb[i] * sb[i];
  }
  constexpr double kRelVar = 1e-20;
  require(saa > kRelVar * qa && saa > 0.0, ErrorCode::ZeroVariance, "first score vector is constant");
  require(sbb > kRelVar * qb && sbb > 0.0, ErrorCode::ZeroVariance, "second score vector is constant");
  return sab / std::sqrt(saa * sbb);
}

std::vector<ConceptDirection> estimate_concepts(const SyntheticModel& model, const MetricContext& mc) {
  std::vector<ConceptDirection> dirs;
  dirs.reserve(model.pair_sets.size());
  for (const auto& set : model.pair_sets) dirs.push_back(estimate_direction(model.gamma, set, mc));
  return dirs;
}

VerifyReport verify_report(const SyntheticModel& model, const MetricContext& mc) {
  const auto dirs = estimate_concepts(model, mc);
  VerifyReport r;
  r.concept_names = model.concept_names;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Vector& g = model.truth.gamma_bars[i];
    const Vector& l = model.truth.lambda_bars[i];
    r.dir_cos.push_back(cip(dirs[i].gamma_bar, g, mc) /
                        (causal_norm(dirs[i].gamma_bar, mc) * causal_norm(g, mc)));
    r.riesz_cos.push_back(dual_cip(dirs[i].lambda_bar, l, mc) /
                          std::sqrt(dual_cip(dirs[i].lambda_bar, dirs[i].lambda_bar, mc) * dual_cip(l, l, mc)));
  }
  const Matrix hc = heatmap(std::span<const ConceptDirection>(dirs), mc, MetricKind::Causal);
  const Matrix he = heatmap(std::span<const ConceptDirection>(dirs), mc, MetricKind::Euclidean);
  std::vector<double> euclid_off;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = 0; j < dirs.size(); ++j) {
      if (i == j) continue;
      r.heatmap_offdiag_max = std::max(r.heatmap_offdiag_max, hc(i, j));
      euclid_off.push_back(he(i, j));
    }
  }
  if (!euclid_off.empty()) {
    std::sort(euclid_off.begin(), euclid_off.end());
    const std::size_t n = euclid_off.size();
    r.euclidean_offdiag_median = n % 2 ? euclid_off[n / 2] : 0.5 * (euclid_off[n / 2 - 1] + euclid_off[n / 2]);
  }
  const ExplicitFormReport ef = explicit_form_check(model.truth.planted_basis, mc.cov);
  r.explicit_offdiag_rel = ef.offdiag_rel;
  r.explicit_m_residual = ef.m_residual;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      r.uncorrelatedness_max = std::max(
          r.uncorrelatedness_max, std::abs(uncorrelatedness_check(model.gamma, dirs[i].lambda_bar, dirs[j].lambda_bar)));
    }
  }
  return r;
}

}  // namespace cg
