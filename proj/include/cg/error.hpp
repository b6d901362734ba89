#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cg {

enum class ErrorCode {
  BadMagic,
  ShapeMismatch,
  NonFiniteEntry,
  IoFailure,
  ParseError,
  DuplicatePair,
  DuplicateTokenInPair,
  IdOutOfRange,
  EmptyConcept,
  DegenerateVocab,
  SingularAfterRidge,
  DimMismatch,
  NotSquare,
  NullDirection,
  TooFewPairs,
  EmptyGroup,
  KOutOfRange,
  InvalidArgument,
  InvalidSpec,
  ZeroVariance,
  UnknownConcept,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the toolkit carries one of the codes above so that
/// callers (and the CLI) can branch on the kind of failure without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) fail(code, detail);
}

}  // namespace cg
