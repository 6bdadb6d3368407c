/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cimu/cima_array.hpp"
#include "cimu/converters.hpp"
#include "cimu/io_frontend.hpp"
#include "cimu/near_mem.hpp"
#include "cimu/tensor.hpp"

namespace cimu {

/// Raw codes for the reshaping buffer. XNOR zeros are masked before
/// broadcast; for xnor:1, which has no zero code, they become code 0.
std::vector<uint8_t> input_codes(std::span<const int32_t> values, const NumberFormat& fmt);

/// Functional CIMU: array + converters + datapath driven through the
/// reshaping buffer, one resident matrix tile at a time.
class Accelerator {
 public:
  /// Loads the tile and gates the banks to the smallest cover of it.
  LoadResult load(const QuantizedTensor& matrix);

  /// decompose -> pack -> fill -> swap -> planes -> evaluate -> ADC -> recombine.
  std::vector<int64_t> run(std::span<const int32_t> x, const NumberFormat& fmt_x,
                           const AdcModel& adc);

  /// Streams the front bank of `buffer`; `values` are the same elements as
  /// integers (for mask derivation).
  std::vector<int64_t> stream(ReshapingBuffer& buffer, std::span<const int32_t> values,
                              const AdcModel& adc);

  /// Single-plane 1-b evaluation through the comparators; +1/-1 per output.
  std::vector<int32_t> stream_binary(ReshapingBuffer& buffer, std::span<const int32_t> values,
                                     std::span<const int> thresholds, int full_scale,
                                     double noise_sigma = 0.0, uint64_t seed = 0);

  const CimaState& array() const noexcept { return array_; }
  const ColumnMap& column_map() const noexcept { return map_; }
  int inputs() const noexcept { return inputs_; }
  int64_t plane_evaluations() const noexcept { return plane_evaluations_; }
  /// Unmasked rows of the most recent MVM.
  int last_n_nonmasked() const noexcept { return last_n_nonmasked_; }

 private:
  void check_vector(std::span<const int32_t> values, const NumberFormat& fmt_x) const;

  CimaState array_;
  ColumnMap map_;
  int inputs_ = 0;
  int64_t plane_evaluations_ = 0;
  uint64_t invocation_ = 0;
  int last_n_nonmasked_ = 0;
};

}  // namespace cimu
