#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dyndisc {

enum class ErrorCode {
  UnsupportedSteps,
  UnsupportedOrder,
  TooFewSamples,
  IndexOutOfRange,
  SingularMatrix,
  DomainError,
  StepUnderflow,
  NonFiniteState,
  NonFiniteGradient,
  MismatchedGrids,
  ZeroDenominator,
  DegenerateFit,
  InvalidArgument,
  ParseError,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; `code()` distinguishes the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dyndisc
