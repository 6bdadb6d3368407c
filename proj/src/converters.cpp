/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/converters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cimu/error.hpp"

namespace cimu {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double unit_interval(uint64_t bits) {
  // 53 random mantissa bits, strictly inside (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

void check_full_scale(int full_scale) {
  if (full_scale < 1 || full_scale > kMaxFullScale) {
    fail(ErrorCode::InvalidConfig,
         "full scale " + std::to_string(full_scale) + " outside [1, 2304]");
  }
}

void check_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    fail(ErrorCode::InvalidConfig, "noise sigma must be finite and non-negative");
  }
}

}  // namespace

void AdcModel::validate() const {
  check_full_scale(full_scale);
  check_sigma(noise_sigma);
}

void AbnModel::validate() const {
  check_full_scale(full_scale);
  check_sigma(noise_sigma);
  if (threshold_code < 0 || threshold_code > kDacMaxCode) {
    fail(ErrorCode::InvalidConfig,
         "threshold code " + std::to_string(threshold_code) + " outside [0, 63]");
  }
}

double charge_noise(uint64_t seed, NoiseKey key, double sigma) {
  if (sigma == 0.0) return 0.0;
  const uint64_t stream = splitmix64(splitmix64(seed ^ 0x5bd1e995ull) ^ key.column);
  const uint64_t draw = splitmix64(stream ^ splitmix64(key.invocation));
  const double u1 = unit_interval(draw);
  const double u2 = unit_interval(splitmix64(draw));
  // Box-Muller, cosine branch only.
  return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int64_t round_half_up_div(int64_t numerator, int64_t denominator) {
  // floor((2n + d) / 2d) for d > 0
  const int64_t num = 2 * numerator + denominator;
  const int64_t den = 2 * denominator;
  int64_t q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

int adc_quantize(int column_sum, const AdcModel& adc, NoiseKey key) {
  int64_t code;
  if (adc.noise_sigma == 0.0) {
    code = round_half_up_div(int64_t{column_sum} * kAdcMaxCode, adc.full_scale);
  } else {
    const double s = column_sum + charge_noise(adc.seed, key, adc.noise_sigma);
    code = static_cast<int64_t>(std::floor(s * kAdcMaxCode / adc.full_scale + 0.5));
  }
  return static_cast<int>(std::clamp<int64_t>(code, 0, kAdcMaxCode));
}

int adc_dequantize(int code, const AdcModel& adc) {
  if (code < 0 || code > kAdcMaxCode) {
    fail(ErrorCode::CodeOutOfRange, "ADC code " + std::to_string(code) + " outside [0, 255]");
  }
  return static_cast<int>(round_half_up_div(int64_t{code} * adc.full_scale, kAdcMaxCode));
}

bool abn_binarize(int column_sum, const AbnModel& abn, NoiseKey key) {
  if (abn.noise_sigma == 0.0) {
    // s >= t*F/63 without leaving the integers
    return int64_t{column_sum} * kDacMaxCode >= int64_t{abn.threshold_code} * abn.full_scale;
  }
  const double s = column_sum + charge_noise(abn.seed, key, abn.noise_sigma);
  return s * kDacMaxCode >= static_cast<double>(abn.threshold_code) * abn.full_scale;
}

int abn_transition_point(const AbnModel& abn) {
  const int64_t num = int64_t{abn.threshold_code} * abn.full_scale;
  return static_cast<int>((num + kDacMaxCode - 1) / kDacMaxCode);
}

}  // namespace cimu
