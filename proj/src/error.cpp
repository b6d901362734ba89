#include "cg/error.hpp"

namespace cg {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicatePair: return "DuplicatePair";
    case ErrorCode::DuplicateTokenInPair: return "DuplicateTokenInPair";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::EmptyConcept: return "EmptyConcept";
    case ErrorCode::DegenerateVocab: return "DegenerateVocab";
    case ErrorCode::SingularAfterRidge: return "SingularAfterRidge";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::NullDirection: return "NullDirection";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::UnknownConcept: return "UnknownConcept";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + detail), code_(code) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace cg
