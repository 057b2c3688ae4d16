#pragma once

#include <stdexcept>
#include <string>

namespace twoway {

enum class ErrorKind {
  SingularChain,
  InvalidSimplex,
  InvalidStochasticMatrix,
  NonpositiveVariance,
  DimensionMismatch,
  InvalidEmission,
  EnumerationTooLarge,
  MissingDataUnsupported,
  EmptyRow,
  EmptyColumn,
  DegenerateRange,
  DegenerateRow,
  ParseError,
  RaggedRows,
  EmptyMatrix,
  InvalidArgument,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularChain: return "SingularChain";
    case ErrorKind::InvalidSimplex: return "InvalidSimplex";
    case ErrorKind::InvalidStochasticMatrix: return "InvalidStochasticMatrix";
    case ErrorKind::NonpositiveVariance: return "NonpositiveVariance";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidEmission: return "InvalidEmission";
    case ErrorKind::EnumerationTooLarge: return "EnumerationTooLarge";
    case ErrorKind::MissingDataUnsupported: return "MissingDataUnsupported";
    case ErrorKind::EmptyRow: return "EmptyRow";
    case ErrorKind::EmptyColumn: return "EmptyColumn";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::DegenerateRow: return "DegenerateRow";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable kind. The message always starts with
/// the kind name so a one-line diagnostic is self-describing.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Errors caused by the numerics rather than by malformed input.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::SingularChain || kind_ == ErrorKind::EnumerationTooLarge ||
           kind_ == ErrorKind::DegenerateRange || kind_ == ErrorKind::InvalidEmission;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace twoway
