#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bpsa {

enum class ErrorCode {
  kOutOfReach,
  kNearSingular,
  kNonFiniteState,
  kSingularSample,
  kOutsideBox,
  kEquilibriumInsideObstacle,
  kInvalidScalar,
  kInfeasible,
  kSolverFailure,
  kEmptySampleSet,
  kEmptyGraph,
  kDegenerateDirection,
  kMaxIterations,
  kDisconnected,
  kDegenerateBelief,
  kSafetyBreach,
  kParseError,
  kValidationError,
  kIoError,
  kFormatVersionMismatch,
  kPortInUse,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

// All recoverable failures in the library surface as this exception; the
// code identifies which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOutOfReach: return "OutOfReach";
    case ErrorCode::kNearSingular: return "NearSingular";
    case ErrorCode::kNonFiniteState: return "NonFiniteState";
    case ErrorCode::kSingularSample: return "SingularSample";
    case ErrorCode::kOutsideBox: return "OutsideBox";
    case ErrorCode::kEquilibriumInsideObstacle: return "EquilibriumInsideObstacle";
    case ErrorCode::kInvalidScalar: return "InvalidScalar";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kSolverFailure: return "SolverFailure";
    case ErrorCode::kEmptySampleSet: return "EmptySampleSet";
    case ErrorCode::kEmptyGraph: return "EmptyGraph";
    case ErrorCode::kDegenerateDirection: return "DegenerateDirection";
    case ErrorCode::kMaxIterations: return "MaxIterations";
    case ErrorCode::kDisconnected: return "Disconnected";
    case ErrorCode::kDegenerateBelief: return "DegenerateBelief";
    case ErrorCode::kSafetyBreach: return "SafetyBreach";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kPortInUse: return "PortInUse";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace bpsa
