#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wristloc {

enum class ErrorCode {
  PlacementFailure,
  InvalidSpec,
  IOFailure,
  InvalidConfig,
  SchemaError,
  VersionError,
  InvalidName,
  InvalidArgument,
  TooFewGroups,
  DimensionMismatch,
  RoutingViolation,
  NonFiniteLoss,
  EmptyTestSet,
  EmptyInput,
  DegenerateSpread,
  EmptyGroup,
  InsufficientGroup,
  CheckpointError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Domain error carrying a stable code. The CLI prints these as
/// "error[<Code>]: <message>" and exits with status 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace wristloc
