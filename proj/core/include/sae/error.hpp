#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sae {

enum class ErrorCode {
  NoBracket,
  NonConvergence,
  NotPositiveDefinite,
  DomainError,
  SingularDesign,
  TooFewAreas,
  ImproperPosterior,
  DegenerateShrinkage,
  BoundaryEstimate,
  InsufficientWithinVariation,
  ParseError,
  ValidationError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Numerical failures (NonConvergence) map to exit code 3 in the CLI; the
/// remaining codes describe invalid input or an estimate the caller must not use.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }
  bool is_numerical() const noexcept { return code_ == ErrorCode::NonConvergence; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace sae
