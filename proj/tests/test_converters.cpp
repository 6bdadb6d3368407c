/* SPDX-License-Identifier: Apache-2.0 */
#include <gtest/gtest.h>

#include <cmath>

#include "cimu/converters.hpp"
#include "test_util.hpp"

using namespace cimu;
using cimu::test::code_of;

TEST(Adc, QuantizeExamples) {
  EXPECT_EQ(adc_quantize(100, AdcModel{255}), 100);
  EXPECT_EQ(adc_quantize(2304, AdcModel{2304}), 255);
  EXPECT_EQ(adc_quantize(1152, AdcModel{2304}), 128);  // 127.5 rounds up
  EXPECT_EQ(adc_quantize(0, AdcModel{2304}), 0);
  EXPECT_EQ(adc_quantize(5000, AdcModel{2304}), 255);  // saturates
}

TEST(Adc, DequantizeExamples) {
  EXPECT_EQ(adc_dequantize(200, AdcModel{255}), 200);
  // 128 * 2304 / 255 = 1156.52..., rounded half up
  EXPECT_EQ(adc_dequantize(128, AdcModel{2304}), 1157);
  EXPECT_NE(adc_dequantize(adc_quantize(1152, AdcModel{2304}), AdcModel{2304}), 1152);
  EXPECT_EQ(code_of([] { adc_dequantize(256, AdcModel{255}); }), ErrorCode::CodeOutOfRange);
  EXPECT_EQ(code_of([] { adc_dequantize(-1, AdcModel{255}); }), ErrorCode::CodeOutOfRange);
}

TEST(Adc, ExactForEveryFullScaleUpTo255) {
  for (int f = 1; f <= 255; ++f) {
    const AdcModel adc{f};
    for (int s = 0; s <= f; ++s) ASSERT_EQ(adc_dequantize(adc_quantize(s, adc), adc), s) << "F=" << f;
  }
}

TEST(Adc, MatchesRealArithmetic) {
  // round_half_up(s * 255 / F) evaluated in long double
  for (const int f : {1, 7, 100, 255, 256, 1000, 2304}) {
    for (int s = 0; s <= f; ++s) {
      const long double exact = static_cast<long double>(s) * 255.0L / f;
      const int expect = static_cast<int>(std::floor(exact + 0.5L));
      ASSERT_EQ(adc_quantize(s, AdcModel{f}), std::min(expect, 255));
    }
  }
}

TEST(Adc, Monotone) {
  for (const int f : {13, 255, 2304}) {
    int prev = 0;
    for (int s = 0; s <= 2304; ++s) {
      const int c = adc_quantize(s, AdcModel{f});
      ASSERT_GE(c, prev);
      prev = c;
    }
  }
}

TEST(Adc, Validation) {
  EXPECT_EQ(code_of([] { AdcModel{0}.validate(); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { AdcModel{2305}.validate(); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { AdcModel{255, -1.0}.validate(); }), ErrorCode::InvalidConfig);
}

TEST(RoundHalfUp, Ties) {
  EXPECT_EQ(round_half_up_div(5, 2), 3);
  EXPECT_EQ(round_half_up_div(-5, 2), -2);
  EXPECT_EQ(round_half_up_div(7, 3), 2);
  EXPECT_EQ(round_half_up_div(-7, 3), -2);
}

TEST(Abn, Examples) {
  for (int s = 0; s <= 300; ++s) EXPECT_TRUE(abn_binarize(s, AbnModel{300, 0}));
  EXPECT_TRUE(abn_binarize(255, AbnModel{255, 63}));
  EXPECT_FALSE(abn_binarize(254, AbnModel{255, 63}));
  EXPECT_TRUE(abn_binarize(2304, AbnModel{2304, 63}));
  EXPECT_FALSE(abn_binarize(2303, AbnModel{2304, 63}));
}

TEST(Abn, TransitionPointIsCeiling) {
  for (const int f : {63, 100, 255, 1152, 2304}) {
    for (int t = 0; t <= 63; ++t) {
      const AbnModel abn{f, t};
      int first = -1;
      for (int s = 0; s <= f + 1 && first < 0; ++s) {
        if (abn_binarize(s, abn)) first = s;
      }
      const int expect = (t * f + 62) / 63;
      EXPECT_EQ(first, expect) << "F=" << f << " t=" << t;
      EXPECT_EQ(abn_transition_point(abn), expect);
      for (int s = first; s <= f; ++s) ASSERT_TRUE(abn_binarize(s, abn));
    }
  }
}

TEST(Abn, Validation) {
  EXPECT_EQ(code_of([] { AbnModel{255, 64}.validate(); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { AbnModel{255, -1}.validate(); }), ErrorCode::InvalidConfig);
}

TEST(Noise, DeterministicPerKey) {
  EXPECT_EQ(charge_noise(1, {3, 4}, 0.0), 0.0);
  const double a = charge_noise(7, {3, 4}, 2.0);
  EXPECT_EQ(a, charge_noise(7, {3, 4}, 2.0));
  EXPECT_NE(a, charge_noise(7, {3, 5}, 2.0));
  EXPECT_NE(a, charge_noise(7, {4, 4}, 2.0));
  EXPECT_NE(a, charge_noise(8, {3, 4}, 2.0));
}

TEST(Noise, Moments) {
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int k = 0; k < n; ++k) {
    const double v = charge_noise(11, {static_cast<uint64_t>(k % 256), static_cast<uint64_t>(k / 256)}, 3.0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.03);
  EXPECT_NEAR(sd, 3.0, 0.03);
}

TEST(Noise, ShiftsCodes) {
  const AdcModel noisy{255, 4.0, 1};
  int moved = 0;
  for (uint64_t c = 0; c < 256; ++c) moved += adc_quantize(128, noisy, {c, 0}) != 128;
  EXPECT_GT(moved, 100);
}
