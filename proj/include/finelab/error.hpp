#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace finelab {

enum class ErrorCode {
  InvalidArgument,
  DegenerateExtent,
  NodeBudgetExceeded,
  ParseError,
  UnknownNode,
  NonpositiveWeight,
  Disconnected,
  NoPositions,
  InfiniteEnergyInput,
  Infeasible,
  EnotInA,
  ScaleUnderflow,
  DescriptorNotDilatable,
  BudgetInfeasible,
  PreconditionViolated,
  HypothesisViolated,
  ShrinkTooSlow,
  GeometryViolation,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Process exit status used by the CLI for each error class.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the error-class prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace finelab
