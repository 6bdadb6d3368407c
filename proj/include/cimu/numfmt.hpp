/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Element number formats for the bit-parallel / bit-serial scheme.
//
// A value of width B is carried as B bits. Two conventions are used for the
// bit order, and both show up in the public API:
//
//   * bit sequences (decompose/compose, bit_weights) are most-significant
//     first, index k carrying weight bit_weights()[k];
//   * raw codes (encode_code/decode_code, packed words, bit planes) hold the
//     same bits as an unsigned integer, sequence index k at code bit B-1-k.
//
// For TwosComplement the raw code is the machine two's-complement pattern.
// For XnorSigned every bit contributes +w or -w, with weights
// (2^(B-2), ..., 2, 1, 1); the two trailing unit weights let zero be encoded.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cimu {

enum class FormatKind { TwosComplement, XnorSigned };

inline constexpr int kMinWidth = 1;
inline constexpr int kMaxWidth = 8;

class NumberFormat {
 public:
  NumberFormat(FormatKind kind, int width);

  static NumberFormat twos(int width) { return {FormatKind::TwosComplement, width}; }
  static NumberFormat xnor(int width) { return {FormatKind::XnorSigned, width}; }
  /// Accepts "twos:B" or "xnor:B".
  static NumberFormat parse(std::string_view text);

  FormatKind kind() const noexcept { return kind_; }
  int width() const noexcept { return width_; }

  int32_t min_value() const noexcept;
  int32_t max_value() const noexcept;
  bool representable(int32_t value) const noexcept;
  /// Ascending list of every value the format can hold.
  std::vector<int32_t> representable_values() const;

  std::string to_string() const;

  friend bool operator==(const NumberFormat&, const NumberFormat&) = default;

 private:
  FormatKind kind_;
  int width_;
};

using BitSequence = std::vector<uint8_t>;

std::vector<int32_t> bit_weights(const NumberFormat& fmt);

/// Throws UnrepresentableValue.
BitSequence decompose(int32_t value, const NumberFormat& fmt);

/// Throws WidthMismatch. Redundant XnorSigned encodings are accepted.
int32_t compose(std::span<const uint8_t> bits, const NumberFormat& fmt);

uint8_t encode_code(int32_t value, const NumberFormat& fmt);
int32_t decode_code(uint8_t code, const NumberFormat& fmt);

/// Weight of raw-code bit `plane` (plane 0 is the least significant code bit).
int32_t plane_weight(const NumberFormat& fmt, int plane);

}  // namespace cimu
