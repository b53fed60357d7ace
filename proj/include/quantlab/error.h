// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QUANTLAB_ERROR_H_
#define QUANTLAB_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace quantlab {

enum class ErrorCode {
  kInvalidParameter,
  kDimensionMismatch,
  kSubdivisionLimit,
  kDegenerateInput,
  kUnsupportedForward,
  kDimensionTooLarge,
  kUnsupportedMethod,
  kUnsupportedCase,
  kShapeMismatch,
  kNonConvergence,
  kConfigError,
  kNumericalError,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Throws Error(code, message) when `condition` is false.
inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace quantlab

#endif  // QUANTLAB_ERROR_H_
