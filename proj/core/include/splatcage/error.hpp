#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace splatcage {

enum class ErrorCode {
  InvalidArgument,
  IoError,
  MissingField,
  MalformedHeader,
  NormalizationFailure,
  EmptyCloud,
  NotSPD,
  DegenerateInput,
  ResolutionOutOfRange,
  EmptyLevelSet,
  NonManifoldOutput,
  PointOutsideCage,
  NearBoundary,
  ConnectivityMismatch,
  DegenerateRotation,
  SingularSystem,
  SolveFailure,
  ViewInvalid,
  DimensionMismatch,
  NaNDetected,
  Cancelled,
  ServiceUnavailable,
  BadResponse,
  MismatchedCages,
  InsufficientKeyframes,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this exception. `index` carries
// the offending element (splat, point, face) when one is meaningful.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace splatcage
