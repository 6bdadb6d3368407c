/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cimu {

enum class ErrorCode {
  UnrepresentableValue,
  WidthMismatch,
  SegmentOutOfRange,
  CapacityExceeded,
  ModeFormatMismatch,
  QuantaOutOfRange,
  CodeOutOfRange,
  PlaneCountMismatch,
  InvalidPostOps,
  ElementTooWide,
  BankBusy,
  PlaneOutOfRange,
  GeometryNotConvolutional,
  UnknownCorner,
  UnloweredPlan,
  UnsupportedKernel,
  ShapeMismatch,
  InvalidConfig,
  ParseError,
  IoError,
  InvariantViolation,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// the command-line frontend can map it onto an exit status.
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

}  // namespace cimu
