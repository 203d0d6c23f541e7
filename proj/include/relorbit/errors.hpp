#pragma once

#include <stdexcept>
#include <string>

namespace relorbit {

// Machine-readable error category, reported by the CLI as {code, message}.
enum class ErrorCode {
  kInvalidParameter,
  kSingularity,
  kSuperluminal,
  kDomain,
  kNoCircularOrbit,
  kPrecondition,
  kConsistency,
  kBasinExceeded,
  kInsufficientData,
  kWrongRegime,
  kTruncated,
  kOrientation,
  kOutOfBranch,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace relorbit
