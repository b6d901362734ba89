#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cg/matrix.hpp"

// On-disk formats.
//
// Matrix file (little-endian):
//   bytes 0..3   magic "CGT1"
//   byte  4      kind tag (0 unembedding, 1 embedding set, 2 direction set)
//   bytes 5..8   u32 rows
//   bytes 9..12  u32 cols
//   then rows*cols IEEE-754 float32, row-major.
//
// Concept pairs (text):      concept <name>  /  id0<TAB>id1 per line
// Quadruples (text):         quad <W>|<Z>    /  y00 y01 y10 y11 on one line
// Labels (text):             one label per line, parallel to a matrix file
// Lines whose first non-blank character is '#' and blank lines are ignored.

namespace cg {

using TokenId = std::uint32_t;

enum class MatrixKind : std::uint8_t {
  Unembedding = 0,
  EmbeddingSet = 1,
  DirectionSet = 2,
};

inline constexpr std::array<char, 4> kMatrixMagic{'C', 'G', 'T', '1'};
inline constexpr std::size_t kMatrixHeaderBytes = 13;

/// V x d output-word vectors; row y is the unembedding of token y.
class UnembeddingMatrix {
 public:
  UnembeddingMatrix() = default;
  explicit UnembeddingMatrix(Matrix rows);

  std::size_t vocab_size() const noexcept { return rows_.rows(); }
  std::size_t dim() const noexcept { return rows_.cols(); }
  std::span<const double> row(TokenId id) const;
  const Matrix& matrix() const noexcept { return rows_; }

 private:
  Matrix rows_;
};

/// n x d context embeddings with optional per-row labels.
struct EmbeddingSet {
  Matrix vectors;
  std::vector<std::string> labels;  // empty, or one per row

  std::size_t size() const noexcept { return vectors.rows(); }
  std::size_t dim() const noexcept { return vectors.cols(); }
  void validate() const;
};

struct TokenPair {
  TokenId id0;
  TokenId id1;
  bool operator==(const TokenPair&) const = default;
};

/// Ordered concept ("male⇒female") with its counterfactual pairs (Y(0), Y(1)).
struct ConceptPairSet {
  std::string name;
  std::vector<TokenPair> pairs;

  /// Enforces non-empty, distinct ids inside a pair, no duplicate pairs, and
  /// (when given) ids below `vocab_size`.
  void validate(std::optional<std::size_t> vocab_size = std::nullopt) const;
};

/// Tokens Y(w, z) for two causally separable concepts W and Z. Slot order is
/// (Y(0,0), Y(0,1), Y(1,0), Y(1,1)).
struct ConceptQuadruple {
  std::string w_name;
  std::string z_name;
  std::array<TokenId, 4> ids{};

  TokenId y00() const noexcept { return ids[0]; }
  TokenId y01() const noexcept { return ids[1]; }
  TokenId y10() const noexcept { return ids[2]; }
  TokenId y11() const noexcept { return ids[3]; }

  void validate(std::optional<std::size_t> vocab_size = std::nullopt) const;
};

struct MatrixHeader {
  MatrixKind kind;
  std::uint32_t rows;
  std::uint32_t cols;
};

struct MatrixFile {
  MatrixKind kind;
  Matrix data;
};

/// Validates magic, kind and payload size against the file length without
/// reading the payload.
MatrixHeader read_matrix_header(const std::filesystem::path& path);

MatrixFile load_matrix(const std::filesystem::path& path);
void save_matrix(const Matrix& m, MatrixKind kind, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_matrix(const Matrix& m, MatrixKind kind);
MatrixFile decode_matrix(std::span<const std::uint8_t> bytes);

UnembeddingMatrix load_unembeddings(const std::filesystem::path& path);
void save_unembeddings(const UnembeddingMatrix& gamma, const std::filesystem::path& path);

/// Loads a kind-1 matrix and, when `labels_path` is given, its parallel labels.
EmbeddingSet load_embedding_set(const std::filesystem::path& path,
                                const std::optional<std::filesystem::path>& labels_path = {});
void save_embedding_set(const EmbeddingSet& set, const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& labels_path = {});

std::vector<ConceptPairSet> parse_concept_pairs(const std::string& text,
                                                std::optional<std::size_t> vocab_size = {});
std::string format_concept_pairs(const std::vector<ConceptPairSet>& sets);
std::vector<ConceptPairSet> load_concept_pairs(const std::filesystem::path& path,
                                               std::optional<std::size_t> vocab_size = {});
void save_concept_pairs(const std::vector<ConceptPairSet>& sets, const std::filesystem::path& path);

std::vector<ConceptQuadruple> parse_quadruples(const std::string& text,
                                               std::optional<std::size_t> vocab_size = {});
std::string format_quadruples(const std::vector<ConceptQuadruple>& quads);
std::vector<ConceptQuadruple> load_quadruples(const std::filesystem::path& path,
                                              std::optional<std::size_t> vocab_size = {});
void save_quadruples(const std::vector<ConceptQuadruple>& quads, const std::filesystem::path& path);

std::vector<std::string> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<std::string>& labels, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

/// Writes via a sibling temporary file and rename, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace cg
