#include "prokan/error.hpp"

namespace prokan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDomain: return "invalid-domain";
    case ErrorCode::kInvalidGrid: return "invalid-grid";
    case ErrorCode::kIndexOutOfRange: return "index-out-of-range";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kStaleCache: return "stale-cache";
    case ErrorCode::kMaxBlocksExceeded: return "max-blocks-exceeded";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kEmptySplit: return "empty-split";
    case ErrorCode::kDimsMismatch: return "dims-mismatch";
    case ErrorCode::kBothEmpty: return "both-empty";
    case ErrorCode::kEmptyMask: return "empty-mask";
    case ErrorCode::kInvalidGeometry: return "invalid-geometry";
    case ErrorCode::kTooFewCases: return "too-few-cases";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kTruncatedFile: return "truncated-file";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kConfigError: return "config-error";
  }
  return "unknown";
}

}  // namespace prokan
