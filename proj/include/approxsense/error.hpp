#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace approxsense {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kStochasticOperator,
  kDeterministicOperator,
  kMissingSeed,
  kInfeasible,
  kEnumerationCap,
  kNonOrthogonal,
  kIngestion,
  kConfig,
  kMissingConstituent,
  kUnknownSuite,
  kCorruptReport,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when no candidate in the search domain satisfies the constraint.
// `min_value` carries the smallest constraint value seen, so callers can
// report what threshold would have been feasible.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& message, double min_value)
      : Error(ErrorCode::kInfeasible, message), min_value_(min_value) {}

  double min_value() const noexcept { return min_value_; }

 private:
  double min_value_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace approxsense
