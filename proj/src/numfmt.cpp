/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/numfmt.hpp"

#include <charconv>

#include "cimu/error.hpp"

namespace cimu {

NumberFormat::NumberFormat(FormatKind kind, int width) : kind_(kind), width_(width) {
  if (width < kMinWidth || width > kMaxWidth) {
    fail(ErrorCode::InvalidConfig,
         "element width " + std::to_string(width) + " outside [1, 8]");
  }
}

NumberFormat NumberFormat::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    fail(ErrorCode::ParseError, "format must look like twos:B or xnor:B, got '" +
                                    std::string(text) + "'");
  }
  const auto kind_text = text.substr(0, colon);
  const auto width_text = text.substr(colon + 1);
  int width = 0;
  const auto [ptr, ec] =
      std::from_chars(width_text.data(), width_text.data() + width_text.size(), width);
  if (ec != std::errc() || ptr != width_text.data() + width_text.size()) {
    fail(ErrorCode::ParseError, "bad format width in '" + std::string(text) + "'");
  }
  if (kind_text == "twos") return twos(width);
  if (kind_text == "xnor") return xnor(width);
  fail(ErrorCode::ParseError, "unknown format kind '" + std::string(kind_text) + "'");
}

int32_t NumberFormat::min_value() const noexcept {
  if (kind_ == FormatKind::XnorSigned && width_ == 1) return -1;
  return -(int32_t{1} << (width_ - 1));
}

int32_t NumberFormat::max_value() const noexcept {
  if (kind_ == FormatKind::TwosComplement) return (int32_t{1} << (width_ - 1)) - 1;
  if (width_ == 1) return 1;
  return int32_t{1} << (width_ - 1);
}

bool NumberFormat::representable(int32_t value) const noexcept {
  if (value < min_value() || value > max_value()) return false;
  if (kind_ == FormatKind::TwosComplement) return true;
  if (width_ == 1) return value != 0;
  return value % 2 == 0;
}

std::vector<int32_t> NumberFormat::representable_values() const {
  std::vector<int32_t> values;
  for (int32_t v = min_value(); v <= max_value(); ++v) {
    if (representable(v)) values.push_back(v);
  }
  return values;
}

std::string NumberFormat::to_string() const {
  return (kind_ == FormatKind::TwosComplement ? "twos:" : "xnor:") + std::to_string(width_);
}

std::vector<int32_t> bit_weights(const NumberFormat& fmt) {
  const int b = fmt.width();
  std::vector<int32_t> weights(static_cast<size_t>(b));
  if (fmt.kind() == FormatKind::TwosComplement) {
    for (int k = 0; k < b; ++k) weights[static_cast<size_t>(k)] = int32_t{1} << (b - 1 - k);
    weights[0] = -weights[0];
    return weights;
  }
  if (b == 1) return {1};
  for (int k = 0; k + 1 < b; ++k) weights[static_cast<size_t>(k)] = int32_t{1} << (b - 2 - k);
  weights[static_cast<size_t>(b - 1)] = 1;
  return weights;
}

BitSequence decompose(int32_t value, const NumberFormat& fmt) {
  if (!fmt.representable(value)) {
    fail(ErrorCode::UnrepresentableValue,
         std::to_string(value) + " is not representable in " + fmt.to_string());
  }
  const int b = fmt.width();
  BitSequence bits(static_cast<size_t>(b), 0);
  if (fmt.kind() == FormatKind::TwosComplement) {
    const auto pattern = static_cast<uint32_t>(value);
    for (int k = 0; k < b; ++k) bits[static_cast<size_t>(k)] = (pattern >> (b - 1 - k)) & 1u;
    return bits;
  }
  if (b == 1) {
    bits[0] = value > 0 ? 1 : 0;
    return bits;
  }
  // value = 2 * P - 2^(B-1), P = sum of weights of the set bits.
  const int32_t half_range = int32_t{1} << (b - 1);
  const int32_t p = (value + half_range) / 2;
  if (p == half_range) {
    bits.assign(static_cast<size_t>(b), 1);
    return bits;
  }
  // P < 2^(B-1): binary in the leading B-1 bits, trailing unit bit cleared.
  for (int k = 0; k + 1 < b; ++k) bits[static_cast<size_t>(k)] = (p >> (b - 2 - k)) & 1;
  return bits;
}

int32_t compose(std::span<const uint8_t> bits, const NumberFormat& fmt) {
  if (bits.size() != static_cast<size_t>(fmt.width())) {
    fail(ErrorCode::WidthMismatch, "expected " + std::to_string(fmt.width()) + " bits, got " +
                                       std::to_string(bits.size()));
  }
  const auto weights = bit_weights(fmt);
  int32_t value = 0;
  for (size_t k = 0; k < bits.size(); ++k) {
    const int32_t bit = bits[k] ? 1 : 0;
    value += fmt.kind() == FormatKind::TwosComplement ? weights[k] * bit
                                                      : weights[k] * (2 * bit - 1);
  }
  return value;
}

uint8_t encode_code(int32_t value, const NumberFormat& fmt) {
  const auto bits = decompose(value, fmt);
  const int b = fmt.width();
  uint32_t code = 0;
  for (int k = 0; k < b; ++k) code |= static_cast<uint32_t>(bits[static_cast<size_t>(k)]) << (b - 1 - k);
  return static_cast<uint8_t>(code);
}

int32_t decode_code(uint8_t code, const NumberFormat& fmt) {
  const int b = fmt.width();
  if (b < 8 && (code >> b) != 0) {
    fail(ErrorCode::ElementTooWide,
         "code " + std::to_string(code) + " wider than " + std::to_string(b) + " bits");
  }
  BitSequence bits(static_cast<size_t>(b));
  for (int k = 0; k < b; ++k) bits[static_cast<size_t>(k)] = (code >> (b - 1 - k)) & 1u;
  return compose(bits, fmt);
}

int32_t plane_weight(const NumberFormat& fmt, int plane) {
  if (plane < 0 || plane >= fmt.width()) {
    fail(ErrorCode::PlaneOutOfRange, "plane " + std::to_string(plane) + " outside format " +
                                         fmt.to_string());
  }
  return bit_weights(fmt)[static_cast<size_t>(fmt.width() - 1 - plane)];
}

}  // namespace cimu
