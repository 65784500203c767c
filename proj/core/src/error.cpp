#include "splatcage/error.hpp"

namespace splatcage {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::NormalizationFailure: return "NormalizationFailure";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NotSPD: return "NotSPD";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::ResolutionOutOfRange: return "ResolutionOutOfRange";
    case ErrorCode::EmptyLevelSet: return "EmptyLevelSet";
    case ErrorCode::NonManifoldOutput: return "NonManifoldOutput";
    case ErrorCode::PointOutsideCage: return "PointOutsideCage";
    case ErrorCode::NearBoundary: return "NearBoundary";
    case ErrorCode::ConnectivityMismatch: return "ConnectivityMismatch";
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::SolveFailure: return "SolveFailure";
    case ErrorCode::ViewInvalid: return "ViewInvalid";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NaNDetected: return "NaNDetected";
    case ErrorCode::Cancelled: return "Cancelled";
    case ErrorCode::ServiceUnavailable: return "ServiceUnavailable";
    case ErrorCode::BadResponse: return "BadResponse";
    case ErrorCode::MismatchedCages: return "MismatchedCages";
    case ErrorCode::InsufficientKeyframes: return "InsufficientKeyframes";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> index)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      index_(index) {}

}  // namespace splatcage
