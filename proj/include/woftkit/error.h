#pragma once

#include <stdexcept>
#include <string>

namespace woftkit {

enum class ErrorCode {
  kInvalidArgument,
  kPointAtInfinity,
  kDegenerateResult,
  kTooFewCorrespondences,
  kDegenerateConfiguration,
  kInsufficientSupport,
  kNoValidHypothesis,
  kImageSizeMismatch,
  kEmptyMask,
  kFrameSizeMismatch,
  kGenerationFailed,
  kEmptyInput,
  kLengthMismatch,
  kIoError,
};

const char* ErrorCodeName(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (the tracker, the CLI) can branch on the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace woftkit
