#include "finelab/error.hpp"

namespace finelab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateExtent: return "DegenerateExtent";
    case ErrorCode::NodeBudgetExceeded: return "NodeBudgetExceeded";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::NonpositiveWeight: return "NonpositiveWeight";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::NoPositions: return "NoPositions";
    case ErrorCode::InfiniteEnergyInput: return "InfiniteEnergyInput";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::EnotInA: return "EnotInA";
    case ErrorCode::ScaleUnderflow: return "ScaleUnderflow";
    case ErrorCode::DescriptorNotDilatable: return "DescriptorNotDilatable";
    case ErrorCode::BudgetInfeasible: return "BudgetInfeasible";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::HypothesisViolated: return "HypothesisViolated";
    case ErrorCode::ShrinkTooSlow: return "ShrinkTooSlow";
    case ErrorCode::GeometryViolation: return "GeometryViolation";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) {
  // 1 is reserved for unexpected failures, 2 for CLI usage errors.
  return 10 + static_cast<int>(code);
}

}  // namespace finelab
