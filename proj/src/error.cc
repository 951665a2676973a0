#include "woftkit/error.h"

namespace woftkit {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kPointAtInfinity: return "PointAtInfinity";
    case ErrorCode::kDegenerateResult: return "DegenerateResult";
    case ErrorCode::kTooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kInsufficientSupport: return "InsufficientSupport";
    case ErrorCode::kNoValidHypothesis: return "NoValidHypothesis";
    case ErrorCode::kImageSizeMismatch: return "ImageSizeMismatch";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kFrameSizeMismatch: return "FrameSizeMismatch";
    case ErrorCode::kGenerationFailed: return "GenerationFailed";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace woftkit
