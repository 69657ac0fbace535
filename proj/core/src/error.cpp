#include "sae/error.hpp"

namespace sae {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::TooFewAreas: return "TooFewAreas";
    case ErrorCode::ImproperPosterior: return "ImproperPosterior";
    case ErrorCode::DegenerateShrinkage: return "DegenerateShrinkage";
    case ErrorCode::BoundaryEstimate: return "BoundaryEstimate";
    case ErrorCode::InsufficientWithinVariation: return "InsufficientWithinVariation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace sae
