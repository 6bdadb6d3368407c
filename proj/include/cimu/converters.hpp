/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Per-column conversion: the 8-b SAR ADC and the binarizing analog
// batch-norm comparator with its 6-b reference DAC.
//
// Both operate on the column sum s in unit-charge counts. The full scale F is
// the column sum that maps onto the top code. Optional Gaussian noise is added
// to s before conversion; it is drawn from a counter-based stream keyed by
// (seed, column, invocation) so results do not depend on evaluation order.

#include <cstdint>

namespace cimu {

inline constexpr int kAdcCodes = 256;
inline constexpr int kAdcMaxCode = kAdcCodes - 1;
inline constexpr int kDacCodes = 64;
inline constexpr int kDacMaxCode = kDacCodes - 1;
inline constexpr int kMaxFullScale = 2304;

struct NoiseKey {
  uint64_t column = 0;
  uint64_t invocation = 0;
};

struct AdcModel {
  int full_scale = kAdcMaxCode;
  double noise_sigma = 0.0;
  uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

struct AbnModel {
  int full_scale = kAdcMaxCode;
  int threshold_code = 0;
  double noise_sigma = 0.0;
  uint64_t seed = 0;

  void validate() const;
};

/// Standard normal sample scaled by sigma; 0 when sigma == 0.
double charge_noise(uint64_t seed, NoiseKey key, double sigma);

/// round_half_up(x) = floor(x + 1/2).
int64_t round_half_up_div(int64_t numerator, int64_t denominator);

int adc_quantize(int column_sum, const AdcModel& adc, NoiseKey key = {});
/// Throws CodeOutOfRange.
int adc_dequantize(int code, const AdcModel& adc);

bool abn_binarize(int column_sum, const AbnModel& abn, NoiseKey key = {});
/// Smallest noiseless column sum that drives the comparator high.
int abn_transition_point(const AbnModel& abn);

}  // namespace cimu
