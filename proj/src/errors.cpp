#include "wristloc/errors.hpp"

namespace wristloc {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IOFailure: return "IOFailure";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::VersionError: return "VersionError";
    case ErrorCode::InvalidName: return "InvalidName";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TooFewGroups: return "TooFewGroups";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RoutingViolation: return "RoutingViolation";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateSpread: return "DegenerateSpread";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::InsufficientGroup: return "InsufficientGroup";
    case ErrorCode::CheckpointError: return "CheckpointError";
  }
  return "Unknown";
}

}  // namespace wristloc
