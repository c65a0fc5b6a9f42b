#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sjreuse {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kDegenerateInput,
  kEmptyHistogram,
  kDomainMismatch,
  kOutOfDomain,
  kEmptySample,
  kFormat,
  kShapeMismatch,
  kNonFiniteLoss,
  kDuplicateId,
  kNotFound,
  kEmptyRepository,
  kCapacity,
  kLocked,
  kInternal,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure raised by the library. The code is what callers branch on;
/// the message carries the offending field, line or id.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sjreuse
