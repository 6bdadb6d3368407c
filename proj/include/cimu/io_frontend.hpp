/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Input side of the accelerator: the word-to-bit reshaping buffer and the
// sparsity / AND-logic controller.
//
// Packed word layout: floor(32 / B) elements per 32-bit word, element k of a
// word at bit offset k*B (little-endian element order), each element's raw
// code LSB first, unused high bits zero. Elements never straddle words.

#include <cstdint>
#include <span>
#include <vector>

#include "cimu/cima_array.hpp"
#include "cimu/numfmt.hpp"

namespace cimu {

struct PackedWordStream {
  std::vector<uint32_t> words;
  int element_bits = 1;
  size_t element_count = 0;
};

int elements_per_word(int element_bits);
size_t words_for(size_t element_count, int element_bits);

/// Throws ElementTooWide (or InvalidConfig for a width outside 1..8).
PackedWordStream pack(std::span<const uint8_t> codes, int element_bits);
std::vector<uint8_t> unpack(const PackedWordStream& stream);

struct WindowGeometry {
  bool convolutional = false;
  int channels = 0;  // C of the 3 x 3 x C window

  int elements() const noexcept { return 9 * channels; }
  int column_elements() const noexcept { return 3 * channels; }
};

/// Double-buffered staging store. The front bank streams bit planes to the
/// array, the back bank is being filled. Element n feeds array row n; for a
/// convolution window the row of (pixel column kx, kernel row ky, channel c)
/// is kx*3C + ky*C + c.
class ReshapingBuffer {
 public:
  static ReshapingBuffer fully_connected(NumberFormat fmt);
  /// Throws InvalidConfig unless 1 <= channels <= 256.
  static ReshapingBuffer conv3(NumberFormat fmt, int channels);

  const NumberFormat& format() const noexcept { return format_; }
  const WindowGeometry& geometry() const noexcept { return geometry_; }

  /// Last write wins until the back bank is committed. Throws BankBusy after
  /// commit_back() and before the next swap, and ElementTooWide / CapacityExceeded.
  void fill_back_bank(const PackedWordStream& words);
  /// Marks the back bank as the next MVM's input.
  void commit_back();
  /// Throws BankBusy while the front bank is streaming.
  void swap_banks();

  void begin_stream() { streaming_ = true; }
  void end_stream() { streaming_ = false; }
  bool streaming() const noexcept { return streaming_; }

  /// Bit `plane` of every front element; rows past the element count read 0.
  /// Throws PlaneOutOfRange.
  BitPlaneVector read_plane(int plane) const;

  /// Back bank becomes the front window shifted by one pixel column with
  /// `new_column` (3C codes) in the freshest position. Throws
  /// GeometryNotConvolutional, ShapeMismatch or BankBusy.
  void stride_shift(std::span<const uint8_t> new_column);

  std::span<const uint8_t> front() const noexcept { return banks_[front_index_]; }
  std::span<const uint8_t> back() const noexcept { return banks_[1 - front_index_]; }

 private:
  ReshapingBuffer(NumberFormat fmt, WindowGeometry geometry);
  void check_back_writable() const;

  NumberFormat format_;
  WindowGeometry geometry_;
  std::vector<uint8_t> banks_[2];
  int front_index_ = 0;
  bool streaming_ = false;
  bool back_committed_ = false;
};

/// XNOR: M_n = 0 exactly where the element value is 0 (and for rows past the
/// vector); AND: everything broadcasts.
MaskVector derive_sparsity(std::span<const int32_t> values, ComputeMode mode, int n_conf);

}  // namespace cimu
