/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/error.hpp"

namespace cimu {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnrepresentableValue: return "UnrepresentableValue";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::SegmentOutOfRange: return "SegmentOutOfRange";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::ModeFormatMismatch: return "ModeFormatMismatch";
    case ErrorCode::QuantaOutOfRange: return "QuantaOutOfRange";
    case ErrorCode::CodeOutOfRange: return "CodeOutOfRange";
    case ErrorCode::PlaneCountMismatch: return "PlaneCountMismatch";
    case ErrorCode::InvalidPostOps: return "InvalidPostOps";
    case ErrorCode::ElementTooWide: return "ElementTooWide";
    case ErrorCode::BankBusy: return "BankBusy";
    case ErrorCode::PlaneOutOfRange: return "PlaneOutOfRange";
    case ErrorCode::GeometryNotConvolutional: return "GeometryNotConvolutional";
    case ErrorCode::UnknownCorner: return "UnknownCorner";
    case ErrorCode::UnloweredPlan: return "UnloweredPlan";
    case ErrorCode::UnsupportedKernel: return "UnsupportedKernel";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace cimu
