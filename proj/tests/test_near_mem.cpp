/* SPDX-License-Identifier: Apache-2.0 */
#include <gtest/gtest.h>

#include "cimu/accelerator.hpp"
#include "cimu/near_mem.hpp"
#include "test_util.hpp"

using namespace cimu;
using cimu::test::code_of;

TEST(NearMem, SignedPlaneValue) {
  EXPECT_EQ(signed_plane_value(200, ComputeMode::Xnor, 200), 200);
  EXPECT_EQ(signed_plane_value(0, ComputeMode::Xnor, 255), -255);
  EXPECT_EQ(signed_plane_value(7, ComputeMode::And, 100), 7);
}

TEST(NearMem, BinaryRecombineIsPopcountIdentity) {
  const auto ctx = RecombineContext::make(NumberFormat::xnor(1), NumberFormat::xnor(1), ComputeMode::Xnor, {255});
  const AdcModel adc{255};
  for (int d = 0; d <= 255; ++d) {
    const std::vector<std::vector<int>> codes{{d}};
    EXPECT_EQ(recombine(codes, ctx, adc), 2 * d - 255);
  }
}

TEST(NearMem, HandExampleThroughPipeline) {
  // y = 3*1 + (-2)*1 + 0*0 + 1*3 = 4; x needs three bits to hold 3
  auto a = QuantizedTensor::matrix(1, 4, NumberFormat::twos(3));
  a.data = {3, -2, 0, 1};
  const std::vector<int32_t> x{1, 1, 0, 3};
  Accelerator acc;
  acc.load(a);
  EXPECT_EQ(acc.run(x, NumberFormat::twos(3), AdcModel{255}), (std::vector<int64_t>{4}));
  EXPECT_EQ(code_of([&] { acc.run(std::vector<int32_t>{1, 1, 0, 3}, NumberFormat::twos(2), AdcModel{255}); }),
            ErrorCode::UnrepresentableValue);
}

TEST(NearMem, ZeroXnorVectorGivesZero) {
  std::mt19937_64 rng(1);
  for (int ba = 1; ba <= 8; ++ba) {
    for (int bx = 2; bx <= 8; ++bx) {
      Accelerator acc;
      acc.load(test::random_matrix(rng, 8, 200, NumberFormat::xnor(ba)));
      const auto y = acc.run(std::vector<int32_t>(200, 0), NumberFormat::xnor(bx), AdcModel{2304});
      for (const auto v : y) ASSERT_EQ(v, 0);
    }
  }
}

TEST(NearMem, PlaneEvaluationsScaleWithInputWidth) {
  std::mt19937_64 rng(2);
  for (int bx = 1; bx <= 8; ++bx) {
    Accelerator acc;
    const auto load = acc.load(test::random_matrix(rng, 10, 50, NumberFormat::twos(3)));
    EXPECT_EQ(load.map.physical_columns(), 30);
    acc.run(test::random_vector(rng, 50, NumberFormat::twos(bx)), NumberFormat::twos(bx), AdcModel{255});
    EXPECT_EQ(acc.plane_evaluations(), bx);
  }
}

TEST(NearMem, RecombineChecksPlaneCounts) {
  const auto ctx = RecombineContext::make(NumberFormat::twos(2), NumberFormat::twos(2), ComputeMode::And, {10, 10});
  const std::vector<std::vector<int>> short_codes{{1, 2}};
  EXPECT_EQ(code_of([&] { recombine(short_codes, ctx, AdcModel{255}); }), ErrorCode::PlaneCountMismatch);
  const std::vector<std::vector<int>> narrow{{1}, {2}};
  EXPECT_EQ(code_of([&] { recombine(narrow, ctx, AdcModel{255}); }), ErrorCode::PlaneCountMismatch);
  EXPECT_EQ(code_of([] { RecombineContext::make(NumberFormat::xnor(2), NumberFormat::twos(2), ComputeMode::And, {1, 1}); }),
            ErrorCode::ModeFormatMismatch);
}

TEST(NearMem, PostOpExamples) {
  EXPECT_EQ(apply_post_ops(5, {}, 0, 16).value, 5);
  const PostOps sign{ActivationOp{Activation::Sign}};
  EXPECT_EQ(apply_post_ops(-3, sign, 0, 16).value, -1);
  EXPECT_EQ(apply_post_ops(0, sign, 0, 16).value, 1);
  const PostOps scale{ScaleOp{{3}, 1}};
  EXPECT_EQ(apply_post_ops(5, scale, 0, 16).value, 8);
  const PostOps relu{ActivationOp{Activation::Relu}};
  EXPECT_EQ(apply_post_ops(-9, relu, 0, 16).value, 0);
}

TEST(NearMem, PostOpsInOrderPerOutput) {
  const PostOps ops{ScaleOp{{2, 4}, 0}, BiasOp{{-1, 10}}, BatchNormOp{{3, 5}, {8, -8}, 2}};
  // output 0: ((7*2) - 1) * 3 + 8 = 47 -> 47/4 = 11.75 -> 12
  EXPECT_EQ(apply_post_ops(7, ops, 0, 16).value, 12);
  // output 1: ((7*4) + 10) * 5 - 8 = 182 -> 45.5 -> 46
  EXPECT_EQ(apply_post_ops(7, ops, 1, 16).value, 46);
  // negative ties round toward +inf: -5/2 = -2.5 -> -2
  EXPECT_EQ(apply_post_ops(-5, PostOps{ScaleOp{{1}, 1}}, 0, 16).value, -2);
}

TEST(NearMem, Saturation) {
  EXPECT_EQ(apply_post_ops(40000, {}, 0, 16).value, 32767);
  EXPECT_EQ(apply_post_ops(-40000, {}, 0, 16).value, -32768);
  EXPECT_EQ(apply_post_ops(40000, {}, 0, 32).value, 40000);
  EXPECT_EQ(apply_post_ops(int64_t{1} << 40, {}, 0, 32).value, 2147483647);
}

TEST(NearMem, InvalidPostOps) {
  EXPECT_EQ(code_of([] { apply_post_ops(1, PostOps{ScaleOp{{}, 0}}, 0, 16); }), ErrorCode::InvalidPostOps);
  EXPECT_EQ(code_of([] { apply_post_ops(1, PostOps{ScaleOp{{1}, 31}}, 0, 16); }), ErrorCode::InvalidPostOps);
  EXPECT_EQ(code_of([] { apply_post_ops(1, PostOps{BiasOp{{1, 2}}}, 2, 16); }), ErrorCode::InvalidPostOps);
  EXPECT_EQ(code_of([] { apply_post_ops(1, {}, 0, 8); }), ErrorCode::InvalidPostOps);
  EXPECT_EQ(code_of([] { validate_post_ops(PostOps{BiasOp{{1, 2}}}, 3); }), ErrorCode::InvalidPostOps);
}

TEST(NearMem, OutputWidth) {
  EXPECT_EQ(output_width(1, 1), 16);
  EXPECT_EQ(output_width(4, 4), 32);
  EXPECT_EQ(output_width(4, 1), 16);
  EXPECT_EQ(output_width(1, 4), 16);
  EXPECT_EQ(output_width(3, 3), 32);
}

TEST(NearMem, ExactRegimeEqualsOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 400; ++trial) {
    const int ba = 1 + trial % 8, bx = 1 + (trial / 8) % 8;
    const bool xnor = trial % 2 == 0;
    const NumberFormat fa = xnor ? NumberFormat::xnor(ba) : NumberFormat::twos(ba);
    const NumberFormat fx = xnor ? NumberFormat::xnor(bx) : NumberFormat::twos(bx);
    const int n = std::uniform_int_distribution<int>(1, 255)(rng);
    const auto a = test::random_matrix(rng, static_cast<size_t>(256 / ba), static_cast<size_t>(n), fa);
    const auto x = test::random_vector(rng, static_cast<size_t>(n), fx, xnor ? 0.2 : 0.0);
    Accelerator acc;
    acc.load(a);
    ASSERT_EQ(acc.run(x, fx, AdcModel{n}), test::dot(a, x)) << "trial " << trial;
  }
}
