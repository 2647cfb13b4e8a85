#include "dyndisc/error.hpp"

namespace dyndisc {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnsupportedSteps: return "UnsupportedSteps";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::MismatchedGrids: return "MismatchedGrids";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace dyndisc
