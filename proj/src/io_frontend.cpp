/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/io_frontend.hpp"

#include <algorithm>
#include <string>

#include "cimu/error.hpp"

namespace cimu {

int elements_per_word(int element_bits) {
  if (element_bits < kMinWidth || element_bits > kMaxWidth) {
    fail(ErrorCode::InvalidConfig,
         "element width " + std::to_string(element_bits) + " outside [1, 8]");
  }
  return 32 / element_bits;
}

size_t words_for(size_t element_count, int element_bits) {
  const auto per_word = static_cast<size_t>(elements_per_word(element_bits));
  return (element_count + per_word - 1) / per_word;
}

PackedWordStream pack(std::span<const uint8_t> codes, int element_bits) {
  const int per_word = elements_per_word(element_bits);
  PackedWordStream out;
  out.element_bits = element_bits;
  out.element_count = codes.size();
  out.words.assign(words_for(codes.size(), element_bits), 0u);
  for (size_t k = 0; k < codes.size(); ++k) {
    if (element_bits < 8 && (codes[k] >> element_bits) != 0) {
      fail(ErrorCode::ElementTooWide, "code " + std::to_string(codes[k]) + " at element " +
                                          std::to_string(k) + " exceeds " +
                                          std::to_string(element_bits) + " bits");
    }
    const auto slot = static_cast<int>(k % static_cast<size_t>(per_word));
    out.words[k / static_cast<size_t>(per_word)] |= static_cast<uint32_t>(codes[k])
                                                    << (slot * element_bits);
  }
  return out;
}

std::vector<uint8_t> unpack(const PackedWordStream& stream) {
  const int per_word = elements_per_word(stream.element_bits);
  if (stream.words.size() < words_for(stream.element_count, stream.element_bits)) {
    fail(ErrorCode::ShapeMismatch, "packed stream too short for " +
                                       std::to_string(stream.element_count) + " elements");
  }
  const uint32_t mask = (1u << stream.element_bits) - 1u;
  std::vector<uint8_t> codes(stream.element_count);
  for (size_t k = 0; k < stream.element_count; ++k) {
    const auto slot = static_cast<int>(k % static_cast<size_t>(per_word));
    codes[k] = static_cast<uint8_t>(
        (stream.words[k / static_cast<size_t>(per_word)] >> (slot * stream.element_bits)) & mask);
  }
  return codes;
}

ReshapingBuffer::ReshapingBuffer(NumberFormat fmt, WindowGeometry geometry)
    : format_(fmt), geometry_(geometry) {}

ReshapingBuffer ReshapingBuffer::fully_connected(NumberFormat fmt) { return {fmt, {}}; }

ReshapingBuffer ReshapingBuffer::conv3(NumberFormat fmt, int channels) {
  if (channels < 1 || channels > 256) {
    fail(ErrorCode::InvalidConfig,
         "convolution window needs 1..256 channels, got " + std::to_string(channels));
  }
  return {fmt, {true, channels}};
}

void ReshapingBuffer::check_back_writable() const {
  if (back_committed_) {
    fail(ErrorCode::BankBusy, "back bank is committed to the next MVM");
  }
}

void ReshapingBuffer::fill_back_bank(const PackedWordStream& words) {
  check_back_writable();
  if (words.element_bits != format_.width()) {
    fail(ErrorCode::WidthMismatch, "stream carries " + std::to_string(words.element_bits) +
                                        "-bit elements, buffer expects " +
                                        std::to_string(format_.width()));
  }
  if (words.element_count > static_cast<size_t>(kRows)) {
    fail(ErrorCode::CapacityExceeded,
         std::to_string(words.element_count) + " elements exceed " + std::to_string(kRows) + " rows");
  }
  banks_[1 - front_index_] = unpack(words);
}

void ReshapingBuffer::commit_back() { back_committed_ = true; }

void ReshapingBuffer::swap_banks() {
  if (streaming_) fail(ErrorCode::BankBusy, "front bank is streaming");
  front_index_ = 1 - front_index_;
  back_committed_ = false;
}

BitPlaneVector ReshapingBuffer::read_plane(int plane) const {
  if (plane < 0 || plane >= format_.width()) {
    fail(ErrorCode::PlaneOutOfRange,
         "plane " + std::to_string(plane) + " outside [0, " + std::to_string(format_.width()) + ")");
  }
  BitPlaneVector out;
  out.plane_index = plane;
  out.format = format_;
  const auto& elements = banks_[front_index_];
  for (size_t n = 0; n < elements.size(); ++n) {
    if ((elements[n] >> plane) & 1u) out.bits.set(n);
  }
  return out;
}

void ReshapingBuffer::stride_shift(std::span<const uint8_t> new_column) {
  if (!geometry_.convolutional) {
    fail(ErrorCode::GeometryNotConvolutional, "stride shift needs a 3x3 window geometry");
  }
  check_back_writable();
  const auto column = static_cast<size_t>(geometry_.column_elements());
  const auto window = static_cast<size_t>(geometry_.elements());
  const auto& front_elems = banks_[front_index_];
  if (new_column.size() != column || front_elems.size() != window) {
    fail(ErrorCode::ShapeMismatch, "stride shift expects a full window and " +
                                       std::to_string(column) + " new elements");
  }
  for (const uint8_t code : new_column) {
    if (format_.width() < 8 && (code >> format_.width()) != 0) {
      fail(ErrorCode::ElementTooWide, "code " + std::to_string(code) + " too wide");
    }
  }
  auto& back_elems = banks_[1 - front_index_];
  back_elems.assign(front_elems.begin() + static_cast<std::ptrdiff_t>(column), front_elems.end());
  back_elems.insert(back_elems.end(), new_column.begin(), new_column.end());
}

MaskVector derive_sparsity(std::span<const int32_t> values, ComputeMode mode, int n_conf) {
  if (mode == ComputeMode::And) return MaskVector::broadcast_all();
  RowBits mask;
  const size_t limit = std::min(values.size(), static_cast<size_t>(kRows));
  for (size_t n = 0; n < limit; ++n) {
    if (values[n] != 0) mask.set(n);
  }
  return MaskVector::from_bits(mask, n_conf);
}

}  // namespace cimu
