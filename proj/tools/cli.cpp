#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "cg/concepts.hpp"
#include "cg/error.hpp"
#include "cg/intervene.hpp"
#include "cg/metric.hpp"
#include "cg/model_io.hpp"
#include "cg/probe.hpp"
#include "cg/synthetic.hpp"

namespace cg::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  fs::path unembeddings;
  fs::path pairs;
  fs::path contexts;
  fs::path labels;
  fs::path quads;
  fs::path out;
  double ridge = kDefaultRidgeRel;
  std::uint64_t seed = 0;
  std::string alphas;
  std::size_t k = 5;
  std::size_t baseline_samples = kDefaultBaselineSamples;
  std::string metric = "causal";

  std::size_t d = 16;
  std::size_t k_concepts = 4;
  std::size_t per_cell = 16;
  std::size_t filler_ratio = 0;
  double noise = 0.05;
};

// ---- formatting -----------------------------------------------------------

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { row(header); }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += field(cells[i]);
    }
    text_ += '\n';
  }
  void save(const fs::path& path) const { write_file_atomic(path, text_); }

 private:
  std::string text_;
};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string heatmap_svg(const Matrix& h, const std::vector<std::string>& names, std::string_view title) {
  constexpr int cell = 24;
  constexpr int margin = 160;
  const int n = static_cast<int>(names.size());
  const int size = margin + n * cell + 10;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) +
                    "\" height=\"" + std::to_string(size) + "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  svg += "<title>" + xml_escape(std::string(title)) + "</title>\n";
  for (int i = 0; i < n; ++i) {
    const int pos = margin + i * cell + cell / 2;
    svg += "<text x=\"" + std::to_string(margin - 4) + "\" y=\"" + std::to_string(pos + 3) +
           "\" text-anchor=\"end\">" + xml_escape(names[i]) + "</text>\n";
    svg += "<text transform=\"translate(" + std::to_string(pos + 3) + "," + std::to_string(margin - 4) +
           ") rotate(-90)\">" + xml_escape(names[i]) + "</text>\n";
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = std::clamp(h(i, j), 0.0, 1.0);
      const int g = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      svg += "<rect x=\"" + std::to_string(margin + j * cell) + "\" y=\"" + std::to_string(margin + i * cell) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"rgb(" +
             std::to_string(g) + "," + std::to_string(g) + "," + std::to_string(g) + ")\"><title>" +
             num(h(i, j)) + "</title></rect>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

// ---- inputs ---------------------------------------------------------------

void require_file(const fs::path& path, std::string_view flag) {
  require(!path.empty(), ErrorCode::InvalidArgument, std::string(flag) + " is required");
  require(fs::is_regular_file(path), ErrorCode::IoFailure,
          std::string(flag) + " '" + path.string() + "' is not a readable file");
}

void prepare_out(const fs::path& out) {
  require(!out.empty(), ErrorCode::InvalidArgument, "--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  require(!ec && fs::is_directory(out), ErrorCode::IoFailure, "cannot create output directory '" + out.string() + "'");
}

double parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size() && !s.empty(), ErrorCode::InvalidArgument,
          "not a number: '" + std::string(s) + "'");
  return v;
}

// "" -> default grid, "lo:step:hi", or "a,b,c".
std::vector<double> parse_alphas(const std::string& text) {
  if (text.empty()) return default_alpha_grid();
  std::vector<std::string_view> parts;
  const char sep = text.find(':') != std::string::npos ? ':' : ',';
  std::string_view rest(text);
  while (true) {
    const auto p = rest.find(sep);
    parts.push_back(rest.substr(0, p));
    if (p == std::string_view::npos) break;
    rest.remove_prefix(p + 1);
  }
  std::vector<double> grid;
  if (sep == ':') {
    require(parts.size() == 3, ErrorCode::InvalidArgument, "--alphas range must be lo:step:hi");
    const double lo = parse_double(parts[0]);
    const double step = parse_double(parts[1]);
    const double hi = parse_double(parts[2]);
    require(step > 0.0 && hi >= lo, ErrorCode::InvalidArgument, "--alphas range needs step > 0 and hi >= lo");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) grid.push_back(lo + step * static_cast<double>(i));
  } else {
    for (auto p : parts) grid.push_back(parse_double(p));
  }
  return grid;
}

struct Loaded {
  UnembeddingMatrix gamma;
  std::vector<ConceptPairSet> pair_sets;
  MetricContext mc;
  std::vector<ConceptDirection> dirs;
};

Loaded load_and_estimate(const Options& o) {
  require_file(o.unembeddings, "--unembeddings");
  require_file(o.pairs, "--pairs");
  Loaded l;
  l.gamma = load_unembeddings(o.unembeddings);
  l.pair_sets = load_concept_pairs(o.pairs, l.gamma.vocab_size());
  l.mc = causal_metric(l.gamma, o.ridge);
  for (const auto& set : l.pair_sets) l.dirs.push_back(estimate_direction(l.gamma, set, l.mc));
  return l;
}

std::vector<std::string> names_of(const std::vector<ConceptDirection>& dirs) {
  std::vector<std::string> names;
  for (const auto& d : dirs) names.push_back(d.name);
  return names;
}

Matrix stack(const std::vector<ConceptDirection>& dirs, bool riesz) {
  Matrix m(dirs.size(), dirs.empty() ? 0 : dirs.front().gamma_bar.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Vector& v = riesz ? dirs[i].lambda_bar : dirs[i].gamma_bar;
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

SyntheticSpec synthetic_spec(const Options& o) {
  SyntheticSpec s;
  s.dim = o.d;
  s.n_concepts = o.k_concepts;
  s.vocab_per_cell = o.per_cell;
  s.filler_ratio = o.filler_ratio;
  s.noise_sigma = o.noise;
  s.seed = o.seed;
  if (s.pairs_per_concept > (s.vocab_per_cell << (s.n_concepts > 0 ? s.n_concepts - 1 : 0))) {
    s.pairs_per_concept = 0;
  }
  return s;
}

// ---- subcommands ----------------------------------------------------------

int cmd_estimate(const Options& o, std::ostream& out, std::ostream& err) {
  prepare_out(o.out);
  require(o.baseline_samples >= 1, ErrorCode::InvalidArgument, "--baseline-samples must be positive");
  const Loaded l = load_and_estimate(o);

  save_matrix(stack(l.dirs, false), MatrixKind::DirectionSet, o.out / "directions.cgt");
  save_matrix(stack(l.dirs, true), MatrixKind::DirectionSet, o.out / "riesz_directions.cgt");
  save_labels(names_of(l.dirs), o.out / "directions.names");

  Csv projections({"concept", "pair_index", "projection"});
  Csv baseline({"concept", "sample_index", "projection"});
  Csv summary({"concept", "n_pairs", "loo_min", "loo_median", "baseline_p95", "fraction_above_p95"});
  for (std::size_t c = 0; c < l.dirs.size(); ++c) {
    const auto& set = l.pair_sets[c];
    const auto base = random_pair_projections(l.gamma, l.dirs[c], o.baseline_samples, o.seed + c, l.mc);
    for (std::size_t i = 0; i < base.size(); ++i) baseline.row({set.name, std::to_string(i), num(base[i])});
    const double p95 = percentile(base, 95.0);
    if (set.pairs.size() < 2) {
      err << "warning: concept '" << set.name << "' has one pair; leave-one-out projections skipped\n";
      summary.row({set.name, std::to_string(set.pairs.size()), "", "", num(p95), ""});
      continue;
    }
    const auto proj = project_pairs(l.gamma, set, l.mc);
    for (std::size_t i = 0; i < proj.size(); ++i) projections.row({set.name, std::to_string(i), num(proj[i])});
    const auto above = std::count_if(proj.begin(), proj.end(), [&](double p) { return p > p95; });
    const double min = *std::min_element(proj.begin(), proj.end());
    summary.row({set.name, std::to_string(proj.size()), num(min), num(percentile(proj, 50.0)), num(p95),
                 num(static_cast<double>(above) / static_cast<double>(proj.size()))});
    out << set.name << ": " << proj.size() << " pairs, min LOO projection " << num(min) << ", baseline p95 "
        << num(p95) << (min > p95 ? "" : "  (not separated from baseline)") << "\n";
  }
  projections.save(o.out / "projections.csv");
  baseline.save(o.out / "baseline.csv");
  summary.save(o.out / "summary.csv");
  out << "wrote " << l.dirs.size() << " directions to " << o.out.string() << "\n";
  return kExitOk;
}

int cmd_heatmap(const Options& o, std::ostream& out, std::ostream&) {
  const MetricKind kind = parse_metric_kind(o.metric);
  prepare_out(o.out);
  const Loaded l = load_and_estimate(o);
  const auto names = names_of(l.dirs);
  const std::span<const ConceptDirection> dirs(l.dirs);
  const Matrix causal = heatmap(dirs, l.mc, MetricKind::Causal);
  const Matrix euclid = heatmap(dirs, l.mc, MetricKind::Euclidean);
  for (const auto& [m, file] : {std::pair{&causal, "heatmap_causal.csv"}, std::pair{&euclid, "heatmap_euclidean.csv"}}) {
    std::vector<std::string> header{"concept"};
    header.insert(header.end(), names.begin(), names.end());
    Csv csv(header);
    for (std::size_t i = 0; i < names.size(); ++i) {
      std::vector<std::string> row{names[i]};
      for (std::size_t j = 0; j < names.size(); ++j) row.push_back(num((*m)(i, j)));
      csv.row(row);
    }
    csv.save(o.out / file);
  }
  const Matrix& shown = kind == MetricKind::Causal ? causal : euclid;
  write_file_atomic(o.out / "heatmap.svg",
                    heatmap_svg(shown, names, std::string(metric_kind_name(kind)) + " inner product"));
  out << "wrote " << names.size() << "x" << names.size() << " heatmaps to " << o.out.string() << "\n";
  return kExitOk;
}

int cmd_probe(const Options& o, std::ostream& out, std::ostream&) {
  prepare_out(o.out);
  require_file(o.contexts, "--contexts");
  require_file(o.labels, "--labels");
  const Loaded l = load_and_estimate(o);
  const EmbeddingSet contexts = load_embedding_set(o.contexts, o.labels);
  require(contexts.dim() == l.gamma.dim(), ErrorCode::DimMismatch, "contexts and unembeddings differ in dimension");

  std::vector<std::string> groups;
  for (const auto& lab : contexts.labels) {
    if (std::find(groups.begin(), groups.end(), lab) == groups.end()) groups.push_back(lab);
  }
  require(groups.size() >= 2, ErrorCode::EmptyGroup, "--labels must name at least two context groups");
  std::vector<EmbeddingSet> by_group;
  for (const auto& g : groups) by_group.push_back(select_label(contexts, g));

  Csv scores({"concept", "context_index", "label", "score"});
  Csv aucs({"concept", "label_a", "label_b", "auc"});
  for (const auto& dir : l.dirs) {
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      scores.row({dir.name, std::to_string(i), contexts.labels[i], num(probe_score(dir, contexts.vectors.row(i)))});
    }
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        const ProbeReport r = probe_report(dir, by_group[a], by_group[b]);
        aucs.row({dir.name, groups[a], groups[b], num(r.auc)});
        out << dir.name << ": AUC(" << groups[a] << " < " << groups[b] << ") = " << num(r.auc) << "\n";
      }
    }
  }
  scores.save(o.out / "probe_scores.csv");
  aucs.save(o.out / "probe_auc.csv");
  return kExitOk;
}

int cmd_intervene(const Options& o, std::ostream& out, std::ostream&) {
  prepare_out(o.out);
  require_file(o.contexts, "--contexts");
  require_file(o.quads, "--quads");
  const std::vector<double> alphas = parse_alphas(o.alphas);
  const Loaded l = load_and_estimate(o);
  require(o.k >= 1 && o.k <= l.gamma.vocab_size(), ErrorCode::KOutOfRange,
          "--k = " + std::to_string(o.k) + " outside [1, " + std::to_string(l.gamma.vocab_size()) + "]");
  const EmbeddingSet contexts =
      load_embedding_set(o.contexts, o.labels.empty() ? std::nullopt : std::optional<fs::path>(o.labels));
  require(contexts.dim() == l.gamma.dim(), ErrorCode::DimMismatch, "contexts and unembeddings differ in dimension");
  const auto quads = load_quadruples(o.quads, l.gamma.vocab_size());

  Csv traj({"quad", "context", "concept", "alpha", "alpha_scaled", "target_logit", "offtarget_logit"});
  Csv topk({"quad", "context", "alpha", "rank", "token_id", "logit"});
  for (std::size_t qi = 0; qi < quads.size(); ++qi) {
    const auto& q = quads[qi];
    const auto it = std::find_if(l.dirs.begin(), l.dirs.end(), [&](const auto& d) { return d.name == q.w_name; });
    require(it != l.dirs.end(), ErrorCode::UnknownConcept,
            "quad " + q.w_name + "|" + q.z_name + ": concept '" + q.w_name + "' is not in --pairs");
    const double lambda_norm = norm(it->lambda_bar);
    const TrajectoryReport rep = logit_trajectories(contexts, q, *it, l.gamma, alphas);
    for (std::size_t c = 0; c < contexts.size(); ++c) {
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        traj.row({std::to_string(qi), std::to_string(c), it->name, num(alphas[a]), num(alphas[a] * lambda_norm),
                  num(rep.target_logits[c][a]), num(rep.offtarget_logits[c][a])});
        const auto top = topk_after_intervention(l.gamma, contexts.vectors.row(c), *it, alphas[a], o.k);
        for (std::size_t r = 0; r < top.size(); ++r) {
          topk.row({std::to_string(qi), std::to_string(c), num(alphas[a]), std::to_string(r + 1),
                    std::to_string(top[r].id), num(top[r].logit)});
        }
      }
    }
    out << "quad " << qi << " (" << q.w_name << " | " << q.z_name << "): " << contexts.size() << " contexts x "
        << alphas.size() << " alphas\n";
  }
  traj.save(o.out / "trajectories.csv");
  topk.save(o.out / "topk.csv");
  return kExitOk;
}

int cmd_synth_verify(const Options& o, std::ostream& out, std::ostream&) {
  prepare_out(o.out);
  const SyntheticModel model = build_synthetic(synthetic_spec(o));
  const MetricContext mc = causal_metric(model.gamma, o.ridge);
  const VerifyReport r = verify_report(model, mc);

  Csv csv({"check", "concept", "value", "threshold", "pass"});
  std::size_t failed = 0;
  const auto add = [&](const std::string& check, const std::string& concept_name, double value, const char* op,
                       std::optional<double> threshold) {
    bool ok = true;
    std::string thr;
    if (threshold) {
      ok = std::string_view(op) == ">" ? value > *threshold : value < *threshold;
      thr = std::string(op) + num(*threshold);
    }
    if (!ok) ++failed;
    csv.row({check, concept_name, num(value), thr, ok ? "1" : "0"});
  };
  for (std::size_t i = 0; i < r.concept_names.size(); ++i) {
    add("dir_cos", r.concept_names[i], r.dir_cos[i], ">", 0.99);
    add("riesz_cos", r.concept_names[i], r.riesz_cos[i], ">", 0.99);
  }
  add("heatmap_offdiag_max", "", r.heatmap_offdiag_max, "<", 0.05);
  if (r.concept_names.size() >= 2) {
    add("euclidean_offdiag_median", "", r.euclidean_offdiag_median, ">", 0.2);
    add("uncorrelatedness_max", "", r.uncorrelatedness_max, "<", 0.05);
  }
  const bool exact = o.noise == 0.0 && o.ridge == 0.0;
  add("explicit_offdiag_rel", "", r.explicit_offdiag_rel, "<", exact ? std::optional(1e-6) : std::nullopt);
  add("explicit_m_residual", "", r.explicit_m_residual, "<", exact ? std::optional(1e-6) : std::nullopt);
  csv.save(o.out / "verify_report.csv");
  out << "synth-verify: " << (failed == 0 ? "PASS" : "FAIL") << " (" << failed << " checks failed), report in "
      << (o.out / "verify_report.csv").string() << "\n";
  return failed == 0 ? kExitOk : kExitVerifyFailed;
}

int cmd_synth_export(const Options& o, std::ostream& out, std::ostream&) {
  prepare_out(o.out);
  const SyntheticModel m = build_synthetic(synthetic_spec(o));
  save_unembeddings(m.gamma, o.out / "unembeddings.cgt");
  save_concept_pairs(m.pair_sets, o.out / "pairs.txt");
  if (!m.quads.empty()) save_quadruples(m.quads, o.out / "quads.txt");
  if (m.probe_contexts.size() > 0) {
    save_embedding_set(m.probe_contexts, o.out / "probe_contexts.cgt", o.out / "probe_contexts.labels");
  }
  if (m.intervention_contexts.size() > 0) {
    save_embedding_set(m.intervention_contexts, o.out / "intervention_contexts.cgt");
  }
  Matrix truth(m.truth.gamma_bars.size(), m.spec.dim);
  for (std::size_t i = 0; i < m.truth.gamma_bars.size(); ++i) {
    std::copy(m.truth.gamma_bars[i].begin(), m.truth.gamma_bars[i].end(), truth.row(i).begin());
  }
  save_matrix(truth, MatrixKind::DirectionSet, o.out / "truth_directions.cgt");
  save_labels(m.concept_names, o.out / "truth_directions.names");
  out << "wrote synthetic model (V = " << m.gamma.vocab_size() << ", d = " << m.spec.dim << ", "
      << m.concept_names.size() << " concepts) to " << o.out.string() << "\n";
  return kExitOk;
}

void add_estimate_inputs(CLI::App* app, Options& o) {
  app->add_option("--unembeddings", o.unembeddings, "Unembedding matrix file")->required();
  app->add_option("--pairs", o.pairs, "Concept pair file")->required();
  app->add_option("--ridge", o.ridge, "Ridge relative to mean covariance eigenvalue")->capture_default_str();
}

void add_synthetic_flags(CLI::App* app, Options& o) {
  app->add_option("--d", o.d, "Dimension")->capture_default_str();
  app->add_option("--k-concepts", o.k_concepts, "Number of planted concepts")->capture_default_str();
  app->add_option("--per-cell", o.per_cell, "Tokens per concept-value combination")->capture_default_str();
  app->add_option("--filler-ratio", o.filler_ratio, "Neutral tokens per factorial token")->capture_default_str();
  app->add_option("--noise", o.noise, "Per-token noise on non-concept coordinates")->capture_default_str();
  app->add_option("--seed", o.seed, "Random seed")->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Causal-inner-product concept geometry toolkit", "concept-geometry"};
  app.require_subcommand(1);

  auto* estimate = app.add_subcommand("estimate", "Concept directions, LOO projections and random-pair baseline");
  add_estimate_inputs(estimate, o);
  estimate->add_option("--out", o.out, "Output directory")->required();
  estimate->add_option("--seed", o.seed, "Baseline sampling seed")->capture_default_str();
  estimate->add_option("--baseline-samples", o.baseline_samples, "Random pairs per concept")->capture_default_str();

  auto* hm = app.add_subcommand("heatmap", "Pairwise inner-product heatmaps");
  add_estimate_inputs(hm, o);
  hm->add_option("--out", o.out, "Output directory")->required();
  hm->add_option("--metric", o.metric, "Metric rendered to heatmap.svg")
      ->check(CLI::IsMember({"causal", "euclidean"}))
      ->capture_default_str();

  auto* probe = app.add_subcommand("probe", "Probe scores and AUC over labeled contexts");
  add_estimate_inputs(probe, o);
  probe->add_option("--contexts", o.contexts, "Context embedding file")->required();
  probe->add_option("--labels", o.labels, "One label per context row")->required();
  probe->add_option("--out", o.out, "Output directory")->required();

  auto* iv = app.add_subcommand("intervene", "Logit trajectories and top-k after steering");
  add_estimate_inputs(iv, o);
  iv->add_option("--contexts", o.contexts, "Context embedding file")->required();
  iv->add_option("--labels", o.labels, "Optional context labels");
  iv->add_option("--quads", o.quads, "Quadruple file")->required();
  iv->add_option("--alphas", o.alphas, "Comma list or lo:step:hi (default 0:0.05:0.4)");
  iv->add_option("--k", o.k, "Top-k size")->capture_default_str();
  iv->add_option("--out", o.out, "Output directory")->required();

  auto* sv = app.add_subcommand("synth-verify", "Check the pipeline against a planted synthetic model");
  add_synthetic_flags(sv, o);
  sv->add_option("--ridge", o.ridge, "Ridge relative to mean covariance eigenvalue")->capture_default_str();
  sv->add_option("--out", o.out, "Output directory")->required();

  auto* se = app.add_subcommand("synth-export", "Write a synthetic model in the toolkit file formats");
  add_synthetic_flags(se, o);
  se->add_option("--out", o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*estimate) return cmd_estimate(o, out, err);
    if (*hm) return cmd_heatmap(o, out, err);
    if (*probe) return cmd_probe(o, out, err);
    if (*iv) return cmd_intervene(o, out, err);
    if (*sv) return cmd_synth_verify(o, out, err);
    if (*se) return cmd_synth_export(o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: IoFailure: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace cg::cli
