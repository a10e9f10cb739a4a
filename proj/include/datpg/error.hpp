#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace datpg {

enum class ErrorCode {
  kParse,
  kFaultList,
  kConfig,
  kPatternLengthMismatch,
  kShapeMismatch,
  kTapeMismatch,
  kFaultSiteInvalid,
  kTooManyInputs,
  kNonpositiveTemperature,
  kNegativeLambda,
  kNonFiniteGradient,
  kNonFiniteUpdate,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace datpg
