#include "cg/model_io.hpp"

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <system_error>
#include <utility>

#include "cg/error.hpp"

namespace cg {
namespace {

namespace fs = std::filesystem;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

MatrixHeader parse_header(const std::uint8_t* bytes, std::size_t available) {
  require(available >= kMatrixHeaderBytes, ErrorCode::BadMagic, "file shorter than header");
  require(std::equal(kMatrixMagic.begin(), kMatrixMagic.end(), bytes,
                     [](char m, std::uint8_t b) { return static_cast<std::uint8_t>(m) == b; }),
          ErrorCode::BadMagic, "missing CGT1 magic");
  const std::uint8_t kind = bytes[4];
  require(kind <= static_cast<std::uint8_t>(MatrixKind::DirectionSet), ErrorCode::BadMagic,
          "unknown kind tag " + std::to_string(kind));
  return {static_cast<MatrixKind>(kind), get_u32(bytes + 5), get_u32(bytes + 9)};
}

std::uint64_t expected_payload(const MatrixHeader& h) {
  return static_cast<std::uint64_t>(h.rows) * h.cols * sizeof(float);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

bool is_skippable(const std::string& line) { return line.empty() || line.front() == '#'; }

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

TokenId parse_id(std::string_view field, std::size_t line_no) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  require(ec == std::errc() && ptr == field.data() + field.size() &&
              value <= std::numeric_limits<TokenId>::max(),
          ErrorCode::ParseError,
          "line " + std::to_string(line_no) + ": bad token id '" + std::string(field) + "'");
  return static_cast<TokenId>(value);
}

bool starts_with_keyword(const std::string& line, std::string_view keyword) {
  return line.size() > keyword.size() && line.compare(0, keyword.size(), keyword) == 0 &&
         (line[keyword.size()] == ' ' || line[keyword.size()] == '\t');
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(trim(line));
  return out;
}

void check_id(TokenId id, std::optional<std::size_t> vocab_size, const std::string& where) {
  if (vocab_size) {
    require(id < *vocab_size, ErrorCode::IdOutOfRange,
            where + ": token id " + std::to_string(id) + " >= vocabulary size " +
                std::to_string(*vocab_size));
  }
}

}  // namespace

UnembeddingMatrix::UnembeddingMatrix(Matrix rows) : rows_(std::move(rows)) {
  require(rows_.rows() >= 2, ErrorCode::DegenerateVocab,
          "unembedding matrix needs at least 2 rows, got " + std::to_string(rows_.rows()));
  require(rows_.cols() >= 1, ErrorCode::ShapeMismatch, "unembedding dimension must be >= 1");
  require(all_finite(rows_.values()), ErrorCode::NonFiniteEntry, "unembedding has non-finite entries");
}

std::span<const double> UnembeddingMatrix::row(TokenId id) const {
  require(id < rows_.rows(), ErrorCode::IdOutOfRange,
          "token id " + std::to_string(id) + " >= vocabulary size " + std::to_string(rows_.rows()));
  return rows_.row(id);
}

void EmbeddingSet::validate() const {
  require(all_finite(vectors.values()), ErrorCode::NonFiniteEntry, "embedding set has non-finite entries");
  require(labels.empty() || labels.size() == vectors.rows(), ErrorCode::ShapeMismatch,
          "label count " + std::to_string(labels.size()) + " != embedding rows " +
              std::to_string(vectors.rows()));
}

void ConceptPairSet::validate(std::optional<std::size_t> vocab_size) const {
  require(!pairs.empty(), ErrorCode::EmptyConcept, "concept '" + name + "' has no pairs");
  std::set<std::pair<TokenId, TokenId>> seen;
  for (const TokenPair& p : pairs) {
    require(p.id0 != p.id1, ErrorCode::DuplicateTokenInPair,
            "concept '" + name + "': pair (" + std::to_string(p.id0) + ", " +
                std::to_string(p.id1) + ") repeats a token");
    check_id(p.id0, vocab_size, "concept '" + name + "'");
    check_id(p.id1, vocab_size, "concept '" + name + "'");
    require(seen.emplace(p.id0, p.id1).second, ErrorCode::DuplicatePair,
            "concept '" + name + "': duplicate pair (" + std::to_string(p.id0) + ", " +
                std::to_string(p.id1) + ")");
  }
}

void ConceptQuadruple::validate(std::optional<std::size_t> vocab_size) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check_id(ids[i], vocab_size, "quad " + w_name + "|" + z_name);
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      require(ids[i] != ids[j], ErrorCode::DuplicateTokenInPair,
              "quad " + w_name + "|" + z_name + ": token " + std::to_string(ids[i]) +
                  " used in two slots");
    }
  }
}

std::vector<std::uint8_t> encode_matrix(const Matrix& m, MatrixKind kind) {
  require(m.rows() <= std::numeric_limits<std::uint32_t>::max() &&
              m.cols() <= std::numeric_limits<std::uint32_t>::max(),
          ErrorCode::ShapeMismatch, "matrix too large for u32 header");
  std::vector<std::uint8_t> out;
  out.reserve(kMatrixHeaderBytes + m.values().size() * sizeof(float));
  out.insert(out.end(), kMatrixMagic.begin(), kMatrixMagic.end());
  out.push_back(static_cast<std::uint8_t>(kind));
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.values()) {
    const float f = static_cast<float>(v);
    require(std::isfinite(f), ErrorCode::NonFiniteEntry, "entry not representable as finite float32");
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

MatrixFile decode_matrix(std::span<const std::uint8_t> bytes) {
  const MatrixHeader h = parse_header(bytes.data(), bytes.size());
  const std::uint64_t payload = bytes.size() - kMatrixHeaderBytes;
  require(payload == expected_payload(h), ErrorCode::ShapeMismatch,
          "payload is " + std::to_string(payload) + " bytes, header declares " +
              std::to_string(h.rows) + "x" + std::to_string(h.cols));
  std::vector<double> values(static_cast<std::size_t>(h.rows) * h.cols);
  const std::uint8_t* p = bytes.data() + kMatrixHeaderBytes;
  for (std::size_t i = 0; i < values.size(); ++i, p += 4) {
    const float f = std::bit_cast<float>(get_u32(p));
    require(std::isfinite(f), ErrorCode::NonFiniteEntry, "entry " + std::to_string(i) + " is not finite");
    values[i] = f;
  }
  return {h.kind, Matrix(h.rows, h.cols, std::move(values))};
}

MatrixHeader read_matrix_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoFailure, "cannot open " + path.string());
  std::array<std::uint8_t, kMatrixHeaderBytes> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  const MatrixHeader h = parse_header(buf.data(), static_cast<std::size_t>(in.gcount()));
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  require(!ec, ErrorCode::IoFailure, "cannot stat " + path.string());
  require(size - kMatrixHeaderBytes == expected_payload(h), ErrorCode::ShapeMismatch,
          path.string() + ": payload size does not match header " + std::to_string(h.rows) + "x" +
              std::to_string(h.cols));
  return h;
}

MatrixFile load_matrix(const fs::path& path) {
  read_matrix_header(path);
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_matrix(bytes);
}

void save_matrix(const Matrix& m, MatrixKind kind, const fs::path& path) {
  write_file_atomic(path, encode_matrix(m, kind));
}

UnembeddingMatrix load_unembeddings(const fs::path& path) {
  MatrixFile f = load_matrix(path);
  require(f.kind == MatrixKind::Unembedding, ErrorCode::BadMagic,
          path.string() + " is not an unembedding matrix (kind " +
              std::to_string(static_cast<int>(f.kind)) + ")");
  return UnembeddingMatrix(std::move(f.data));
}

void save_unembeddings(const UnembeddingMatrix& gamma, const fs::path& path) {
  save_matrix(gamma.matrix(), MatrixKind::Unembedding, path);
}

EmbeddingSet load_embedding_set(const fs::path& path, const std::optional<fs::path>& labels_path) {
  MatrixFile f = load_matrix(path);
  require(f.kind == MatrixKind::EmbeddingSet, ErrorCode::BadMagic,
          path.string() + " is not an embedding set (kind " +
              std::to_string(static_cast<int>(f.kind)) + ")");
  EmbeddingSet set{std::move(f.data), {}};
  if (labels_path) set.labels = load_labels(*labels_path);
  set.validate();
  return set;
}

void save_embedding_set(const EmbeddingSet& set, const fs::path& path,
                        const std::optional<fs::path>& labels_path) {
  set.validate();
  save_matrix(set.vectors, MatrixKind::EmbeddingSet, path);
  if (labels_path) save_labels(set.labels, *labels_path);
}

std::vector<ConceptPairSet> parse_concept_pairs(const std::string& text,
                                                std::optional<std::size_t> vocab_size) {
  std::vector<ConceptPairSet> sets;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::size_t line_no = i + 1;
    if (is_skippable(line)) continue;
    if (starts_with_keyword(line, "concept")) {
      std::string name = trim(std::string_view(line).substr(7));
      require(!name.empty(), ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty concept name");
      sets.push_back({std::move(name), {}});
      continue;
    }
    require(!sets.empty(), ErrorCode::ParseError,
            "line " + std::to_string(line_no) + ": pair before any 'concept' header");
    const auto fields = split_ws(line);
    require(fields.size() == 2, ErrorCode::ParseError,
            "line " + std::to_string(line_no) + ": expected 'id0<TAB>id1'");
    sets.back().pairs.push_back({parse_id(fields[0], line_no), parse_id(fields[1], line_no)});
  }
  require(!sets.empty(), ErrorCode::EmptyConcept, "no concepts in pair file");
  for (const auto& s : sets) s.validate(vocab_size);
  return sets;
}

std::string format_concept_pairs(const std::vector<ConceptPairSet>& sets) {
  std::string out;
  for (const auto& s : sets) {
    out += "concept " + s.name + "\n";
    for (const auto& p : s.pairs) out += std::to_string(p.id0) + "\t" + std::to_string(p.id1) + "\n";
  }
  return out;
}

std::vector<ConceptPairSet> load_concept_pairs(const fs::path& path, std::optional<std::size_t> vocab_size) {
  return parse_concept_pairs(read_text_file(path), vocab_size);
}

void save_concept_pairs(const std::vector<ConceptPairSet>& sets, const fs::path& path) {
  for (const auto& s : sets) s.validate();
  write_file_atomic(path, format_concept_pairs(sets));
}

std::vector<ConceptQuadruple> parse_quadruples(const std::string& text, std::optional<std::size_t> vocab_size) {
  std::vector<ConceptQuadruple> quads;
  bool awaiting_ids = false;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::size_t line_no = i + 1;
    if (is_skippable(line)) continue;
    if (starts_with_keyword(line, "quad")) {
      require(!awaiting_ids, ErrorCode::ParseError, "line " + std::to_string(line_no) + ": quad header without ids");
      const std::string names = trim(std::string_view(line).substr(4));
      const auto bar = names.find('|');
      require(bar != std::string::npos, ErrorCode::ParseError,
              "line " + std::to_string(line_no) + ": expected 'quad <W>|<Z>'");
      ConceptQuadruple q;
      q.w_name = trim(std::string_view(names).substr(0, bar));
      q.z_name = trim(std::string_view(names).substr(bar + 1));
      require(!q.w_name.empty() && !q.z_name.empty(), ErrorCode::ParseError,
              "line " + std::to_string(line_no) + ": empty concept name in quad header");
      quads.push_back(std::move(q));
      awaiting_ids = true;
      continue;
    }
    require(awaiting_ids, ErrorCode::ParseError,
            "line " + std::to_string(line_no) + ": ids without a 'quad' header");
    const auto fields = split_ws(line);
    require(fields.size() == 4, ErrorCode::ParseError,
            "line " + std::to_string(line_no) + ": expected four token ids");
    for (std::size_t k = 0; k < 4; ++k) quads.back().ids[k] = parse_id(fields[k], line_no);
    quads.back().validate(vocab_size);
    awaiting_ids = false;
  }
  require(!awaiting_ids, ErrorCode::ParseError, "last quad header has no ids");
  return quads;
}

std::string format_quadruples(const std::vector<ConceptQuadruple>& quads) {
  std::string out;
  for (const auto& q : quads) {
    out += "quad " + q.w_name + "|" + q.z_name + "\n";
    out += std::to_string(q.ids[0]) + "\t" + std::to_string(q.ids[1]) + "\t" +
           std::to_string(q.ids[2]) + "\t" + std::to_string(q.ids[3]) + "\n";
  }
  return out;
}

std::vector<ConceptQuadruple> load_quadruples(const fs::path& path, std::optional<std::size_t> vocab_size) {
  return parse_quadruples(read_text_file(path), vocab_size);
}

void save_quadruples(const std::vector<ConceptQuadruple>& quads, const fs::path& path) {
  for (const auto& q : quads) q.validate();
  write_file_atomic(path, format_quadruples(quads));
}

std::vector<std::string> load_labels(const fs::path& path) {
  std::vector<std::string> labels;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    labels.push_back(line);
  }
  return labels;
}

void save_labels(const std::vector<std::string>& labels, const fs::path& path) {
  std::string out;
  for (const auto& l : labels) {
    require(l.find('\n') == std::string::npos, ErrorCode::InvalidArgument, "label contains a newline");
    out += l + "\n";
  }
  write_file_atomic(path, out);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::IoFailure, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorCode::IoFailure, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::IoFailure, "cannot rename into " + path.string());
  }
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace cg
