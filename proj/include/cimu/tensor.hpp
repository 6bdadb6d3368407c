/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cimu/numfmt.hpp"

namespace cimu {

/// Integer tensor whose elements are declared to live in `format`. A matrix
/// is stored row-major as [rows x cols]; a vector has a single dimension.
struct QuantizedTensor {
  std::vector<size_t> shape;
  std::vector<int32_t> data;
  NumberFormat format = NumberFormat::twos(8);

  static QuantizedTensor matrix(size_t rows, size_t cols, NumberFormat fmt);
  static QuantizedTensor vector(std::vector<int32_t> values, NumberFormat fmt);

  size_t size() const noexcept;
  size_t rows() const noexcept { return shape.empty() ? 0 : shape.front(); }
  /// Product of all trailing dimensions.
  size_t cols() const noexcept;

  int32_t& at(size_t r, size_t c) { return data[r * cols() + c]; }
  int32_t at(size_t r, size_t c) const { return data[r * cols() + c]; }
  std::span<const int32_t> row(size_t r) const { return {data.data() + r * cols(), cols()}; }

  /// Throws ShapeMismatch or UnrepresentableValue.
  void validate() const;
  /// Like validate(), but zero is also accepted (XNOR zeros travel as masks).
  void validate_allowing_zero() const;
};

}  // namespace cimu
