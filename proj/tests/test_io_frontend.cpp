/* SPDX-License-Identifier: Apache-2.0 */
#include <gtest/gtest.h>

#include "cimu/accelerator.hpp"
#include "cimu/io_frontend.hpp"
#include "test_util.hpp"

using namespace cimu;
using cimu::test::code_of;

namespace {

std::vector<uint8_t> random_codes(std::mt19937_64& rng, size_t n, int bits) {
  std::uniform_int_distribution<int> d(0, (1 << bits) - 1);
  std::vector<uint8_t> out(n);
  for (auto& c : out) c = static_cast<uint8_t>(d(rng));
  return out;
}

}  // namespace

TEST(Pack, WordCounts) {
  EXPECT_EQ(pack(std::vector<uint8_t>(2304, 1), 1).words.size(), 72u);
  EXPECT_EQ(pack(std::vector<uint8_t>(2304, 7), 8).words.size(), 576u);
  EXPECT_EQ(pack(std::vector<uint8_t>(10, 5), 3).words.size(), 1u);
  EXPECT_EQ(pack(std::vector<uint8_t>(11, 5), 3).words.size(), 2u);
  EXPECT_EQ(words_for(2304, 1), 72u);
  EXPECT_EQ(elements_per_word(3), 10);
  EXPECT_EQ(elements_per_word(5), 6);
}

TEST(Pack, Layout) {
  // element k at bit offset k*B, LSB first, unused high bits zero
  const std::vector<uint8_t> codes{0b101, 0b011, 0b111, 0b001, 0, 0, 0, 0, 0, 0b110};
  const auto s = pack(codes, 3);
  uint32_t expect = 0;
  for (size_t k = 0; k < codes.size(); ++k) expect |= static_cast<uint32_t>(codes[k]) << (3 * k);
  ASSERT_EQ(s.words.size(), 1u);
  EXPECT_EQ(s.words[0], expect);
  EXPECT_EQ(s.words[0] >> 30, 0u);
}

TEST(Pack, RoundTripProperty) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const int bits = 1 + trial % 8;
    const size_t n = std::uniform_int_distribution<size_t>(0, 2304)(rng);
    const auto codes = random_codes(rng, n, bits);
    const auto s = pack(codes, bits);
    ASSERT_EQ(s.words.size(), (n + static_cast<size_t>(32 / bits) - 1) / static_cast<size_t>(32 / bits));
    ASSERT_EQ(unpack(s), codes);
  }
}

TEST(Pack, Errors) {
  EXPECT_EQ(code_of([] { pack(std::vector<uint8_t>{4}, 2); }), ErrorCode::ElementTooWide);
  EXPECT_EQ(code_of([] { pack(std::vector<uint8_t>{1}, 9); }), ErrorCode::InvalidConfig);
}

TEST(ReshapingBuffer, FillSwapAndLastWriteWins) {
  auto buf = ReshapingBuffer::fully_connected(NumberFormat::twos(3));
  buf.fill_back_bank(pack(std::vector<uint8_t>{1, 2, 3}, 3));
  buf.fill_back_bank(pack(std::vector<uint8_t>{4, 5}, 3));
  buf.commit_back();
  EXPECT_EQ(code_of([&] { buf.fill_back_bank(pack(std::vector<uint8_t>{6}, 3)); }), ErrorCode::BankBusy);
  buf.swap_banks();
  EXPECT_EQ(std::vector<uint8_t>(buf.front().begin(), buf.front().end()), (std::vector<uint8_t>{4, 5}));

  // fill the back bank while the front streams
  buf.begin_stream();
  const auto before = buf.read_plane(2);
  buf.fill_back_bank(pack(std::vector<uint8_t>{7, 7}, 3));
  EXPECT_EQ(buf.read_plane(2).bits, before.bits);
  EXPECT_EQ(code_of([&] { buf.swap_banks(); }), ErrorCode::BankBusy);
  buf.end_stream();
  buf.swap_banks();
  EXPECT_EQ(buf.front()[0], 7);
}

TEST(ReshapingBuffer, FillErrors) {
  auto buf = ReshapingBuffer::fully_connected(NumberFormat::twos(2));
  EXPECT_EQ(code_of([&] { buf.fill_back_bank(pack(std::vector<uint8_t>{1}, 3)); }), ErrorCode::WidthMismatch);
  EXPECT_EQ(code_of([&] { buf.fill_back_bank(pack(std::vector<uint8_t>(2305, 1), 2)); }), ErrorCode::CapacityExceeded);
  EXPECT_EQ(code_of([] { ReshapingBuffer::conv3(NumberFormat::twos(2), 257); }), ErrorCode::InvalidConfig);
}

TEST(ReshapingBuffer, ReadPlaneBits) {
  auto buf = ReshapingBuffer::fully_connected(NumberFormat::twos(3));
  std::vector<uint8_t> codes(8, 0);
  codes[7] = 0b101;
  buf.fill_back_bank(pack(codes, 3));
  buf.commit_back();
  buf.swap_banks();
  EXPECT_TRUE(buf.read_plane(0).bits.test(7));
  EXPECT_FALSE(buf.read_plane(1).bits.test(7));
  EXPECT_TRUE(buf.read_plane(2).bits.test(7));
  EXPECT_EQ(buf.read_plane(0).bits.count(), 1u);
  EXPECT_EQ(code_of([&] { buf.read_plane(3); }), ErrorCode::PlaneOutOfRange);
}

TEST(ReshapingBuffer, PlanesReconstructEveryElement) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const int b = 1 + trial % 8;
    const NumberFormat fmt = trial % 2 ? NumberFormat::twos(b) : NumberFormat::xnor(b);
    const auto values = test::random_vector(rng, 1 + trial * 11 % 2304, fmt);
    std::vector<uint8_t> codes;
    for (const int32_t v : values) codes.push_back(encode_code(v, fmt));
    auto buf = ReshapingBuffer::fully_connected(fmt);
    buf.fill_back_bank(pack(codes, b));
    buf.commit_back();
    buf.swap_banks();
    std::vector<BitPlaneVector> planes;
    for (int i = 0; i < b; ++i) planes.push_back(buf.read_plane(i));
    for (size_t n = 0; n < values.size(); ++n) {
      BitSequence bits(static_cast<size_t>(b));
      for (int i = 0; i < b; ++i) bits[static_cast<size_t>(b - 1 - i)] = planes[static_cast<size_t>(i)].bits.test(n);
      ASSERT_EQ(compose(bits, fmt), values[n]);
    }
    for (size_t n = values.size(); n < static_cast<size_t>(kRows); ++n) ASSERT_FALSE(planes[0].bits.test(n));
  }
}

TEST(ReshapingBuffer, StrideShiftIsAFifoOfColumns) {
  const int c = 2;
  auto buf = ReshapingBuffer::conv3(NumberFormat::twos(4), c);
  const std::vector<uint8_t> p0{1, 1, 1, 1, 1, 1}, p1{2, 2, 2, 2, 2, 2}, p2{3, 3, 3, 3, 3, 3}, p3{4, 5, 6, 7, 8, 9};
  std::vector<uint8_t> window = p0;
  window.insert(window.end(), p1.begin(), p1.end());
  window.insert(window.end(), p2.begin(), p2.end());
  buf.fill_back_bank(pack(window, 4));
  buf.commit_back();
  buf.swap_banks();
  buf.stride_shift(p3);
  buf.commit_back();
  buf.swap_banks();
  std::vector<uint8_t> expect = p1;
  expect.insert(expect.end(), p2.begin(), p2.end());
  expect.insert(expect.end(), p3.begin(), p3.end());
  EXPECT_EQ(std::vector<uint8_t>(buf.front().begin(), buf.front().end()), expect);
  EXPECT_EQ(code_of([&] { buf.stride_shift(std::vector<uint8_t>{1, 2}); }), ErrorCode::ShapeMismatch);
}

TEST(ReshapingBuffer, StrideShiftTransfersAThird) {
  EXPECT_EQ(words_for(3 * 128, 1), 12u);
  EXPECT_EQ(words_for(9 * 128, 1), 36u);
}

TEST(ReshapingBuffer, StrideShiftNeedsConvGeometry) {
  auto buf = ReshapingBuffer::fully_connected(NumberFormat::twos(1));
  EXPECT_EQ(code_of([&] { buf.stride_shift(std::vector<uint8_t>{1, 0, 1}); }), ErrorCode::GeometryNotConvolutional);
}

TEST(Sparsity, Masks) {
  const std::vector<int32_t> zeros(100, 0);
  const auto all = derive_sparsity(zeros, ComputeMode::Xnor, 576);
  EXPECT_EQ(all.zero_tally, 576);
  EXPECT_EQ(all.mask.count(), 0u);

  std::vector<int32_t> dense(576, 2);
  const auto none = derive_sparsity(dense, ComputeMode::Xnor, 576);
  EXPECT_EQ(none.zero_tally, 0);

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = test::random_vector(rng, 1000, NumberFormat::xnor(3), 0.3);
    const auto m = derive_sparsity(x, ComputeMode::Xnor, 1152);
    int active_set = 0;
    for (size_t n = 0; n < 1152; ++n) {
      const bool expect = n < x.size() && x[n] != 0;
      ASSERT_EQ(m.mask.test(n), expect);
      active_set += m.mask.test(n) ? 1 : 0;
    }
    ASSERT_EQ(m.zero_tally + active_set, 1152);
  }
  const auto and_mask = derive_sparsity(zeros, ComputeMode::And, 2304);
  EXPECT_EQ(and_mask.zero_tally, 0);
  EXPECT_EQ(and_mask.mask.count(), static_cast<size_t>(kRows));
}

TEST(Sparsity, InputCodesKeepZerosOffTheArray) {
  const auto codes = input_codes(std::vector<int32_t>{0, 1, -1}, NumberFormat::xnor(1));
  EXPECT_EQ(codes, (std::vector<uint8_t>{0, 1, 0}));
}
