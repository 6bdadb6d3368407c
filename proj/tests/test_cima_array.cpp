/* SPDX-License-Identifier: Apache-2.0 */
#include <gtest/gtest.h>

#include <set>

#include "cimu/cima_array.hpp"
#include "test_util.hpp"

using namespace cimu;
using cimu::test::code_of;

namespace {

BitPlaneVector plane_of(const std::vector<int>& bits, NumberFormat fmt) {
  BitPlaneVector p;
  p.format = fmt;
  for (size_t n = 0; n < bits.size(); ++n) p.bits.set(n, bits[n] != 0);
  return p;
}

const NumberFormat kXnor1 = NumberFormat::xnor(1);
const NumberFormat kTwos1 = NumberFormat::twos(1);

}  // namespace

TEST(CimaArray, CapacityIs590kb) {
  EXPECT_EQ(kRows * kColumns, 589824);
  EXPECT_EQ(kSegmentCount * kSegmentBits, 589824);
  EXPECT_EQ(kSegmentCount, 768);
}

TEST(CimaArray, WriteSegmentAddressesRowMajorOffsets) {
  CimaState s;
  SegmentPayload ones;
  ones.set();
  s.write_segment(0, ones);
  EXPECT_TRUE(s.cell(0, 0));
  EXPECT_TRUE(s.cell(2, 255));
  EXPECT_FALSE(s.cell(3, 0));

  CimaState t;
  SegmentPayload one_bit;
  one_bit.set(300);  // offset 5*768 + 300 -> row 16, column 44
  t.write_segment(5, one_bit);
  EXPECT_TRUE(t.cell((5 * 768 + 300) / 256, (5 * 768 + 300) % 256));
  int set_cells = 0;
  for (int c = 0; c < kColumns; ++c) set_cells += static_cast<int>(t.column_bits(c).count());
  EXPECT_EQ(set_cells, 1);
}

TEST(CimaArray, FullWriteFillsEveryCell) {
  CimaState s;
  SegmentPayload ones;
  ones.set();
  for (int k = 0; k < kSegmentCount; ++k) s.write_segment(k, ones);
  for (int c = 0; c < kColumns; ++c) ASSERT_EQ(s.column_bits(c).count(), static_cast<size_t>(kRows));
  EXPECT_EQ(s.segment_writes(), 768);
}

TEST(CimaArray, WriteSegmentBounds) {
  CimaState s;
  EXPECT_EQ(code_of([&] { s.write_segment(768, {}); }), ErrorCode::SegmentOutOfRange);
  EXPECT_EQ(code_of([&] { s.write_segment(-1, {}); }), ErrorCode::SegmentOutOfRange);
}

TEST(CimaArray, LoadMatrixPlacement) {
  std::mt19937_64 rng(3);
  {
    CimaState s;
    const auto a = test::random_matrix(rng, 256, 2304, kXnor1);
    const auto r = load_matrix(s, a);
    EXPECT_EQ(r.map.physical_columns(), 256);
    EXPECT_EQ(r.segments_written, 768);
  }
  {
    CimaState s;
    const NumberFormat fmt = NumberFormat::twos(4);
    const auto a = test::random_matrix(rng, 64, 100, fmt);
    const auto r = load_matrix(s, a);
    EXPECT_EQ(r.map.physical_columns(), 256);
    EXPECT_EQ(r.segments_written, 34);
    for (int m = 0; m < 64; ++m) {
      ASSERT_EQ(r.map.columns[static_cast<size_t>(m)], (std::vector<int>{4 * m, 4 * m + 1, 4 * m + 2, 4 * m + 3}));
    }
    EXPECT_EQ(r.map.weights, bit_weights(fmt));
    for (int m = 0; m < 64; ++m) {
      for (int n = 0; n < 100; ++n) {
        const auto bits = decompose(a.at(static_cast<size_t>(m), static_cast<size_t>(n)), fmt);
        for (int j = 0; j < 4; ++j) ASSERT_EQ(s.cell(n, 4 * m + j), bits[static_cast<size_t>(j)] != 0);
      }
    }
  }
}

TEST(CimaArray, LoadMatrixErrors) {
  std::mt19937_64 rng(4);
  CimaState s;
  EXPECT_EQ(code_of([&] { load_matrix(s, test::random_matrix(rng, 65, 10, NumberFormat::twos(4))); }),
            ErrorCode::CapacityExceeded);
  EXPECT_EQ(code_of([&] { load_matrix(s, test::random_matrix(rng, 2, 2305, kXnor1)); }), ErrorCode::CapacityExceeded);
  auto bad = QuantizedTensor::matrix(2, 2, NumberFormat::xnor(2));
  bad.data = {2, 1, 0, -2};
  EXPECT_EQ(code_of([&] { load_matrix(s, bad); }), ErrorCode::UnrepresentableValue);
}

TEST(CimaArray, LoadClearsStaleRowsInTouchedSegments) {
  CimaState s;
  SegmentPayload ones;
  ones.set();
  s.write_segment(0, ones);
  auto a = QuantizedTensor::matrix(1, 1, kTwos1);
  a.data = {0};
  load_matrix(s, a);
  EXPECT_FALSE(s.cell(1, 0));
  EXPECT_FALSE(s.cell(2, 0));
}

TEST(CimaArray, XnorRampWithAllOnesMatrix) {
  CimaState s;
  auto a = QuantizedTensor::matrix(256, 255, kXnor1);
  std::fill(a.data.begin(), a.data.end(), 1);
  load_matrix(s, a);
  s.gate_banks(1, 4);
  for (const int k : {0, 1, 100, 255}) {
    std::vector<int> bits(255, 0);
    std::fill(bits.begin(), bits.begin() + k, 1);
    RowBits mask;
    for (int n = 0; n < 255; ++n) mask.set(static_cast<size_t>(n));
    const auto sums = evaluate(s, plane_of(bits, kXnor1), ComputeMode::Xnor, MaskVector::from_bits(mask, s.n_conf()));
    for (int c = 0; c < 256; ++c) ASSERT_EQ(sums.sums[static_cast<size_t>(c)], k);
    EXPECT_EQ(sums.n_nonmasked, 255);
  }
}

TEST(CimaArray, AndModeZeroInputGivesZero) {
  std::mt19937_64 rng(5);
  CimaState s;
  load_matrix(s, test::random_matrix(rng, 256, 2304, kTwos1));
  const auto sums = evaluate(s, plane_of({}, kTwos1), ComputeMode::And, MaskVector::broadcast_all());
  for (const int v : sums.sums) EXPECT_EQ(v, 0);
}

TEST(CimaArray, MatchesPopcountOracle) {
  std::mt19937_64 rng(6);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    CimaState s;
    const bool xnor = trial % 2 == 0;
    const NumberFormat fmt = xnor ? kXnor1 : kTwos1;
    const int rows = 16 + trial % 7, cols = 8;
    const auto a = test::random_matrix(rng, static_cast<size_t>(cols), static_cast<size_t>(rows), fmt);
    load_matrix(s, a);
    s.gate_banks(1, 1);
    std::vector<int> x(static_cast<size_t>(rows)), m(static_cast<size_t>(rows));
    RowBits mask;
    for (int n = 0; n < rows; ++n) {
      x[static_cast<size_t>(n)] = coin(rng);
      m[static_cast<size_t>(n)] = xnor ? coin(rng) : 1;
      mask.set(static_cast<size_t>(n), m[static_cast<size_t>(n)] != 0);
    }
    if (!xnor) mask.set();
    const auto sums = evaluate(s, plane_of(x, fmt), xnor ? ComputeMode::Xnor : ComputeMode::And,
                               xnor ? MaskVector::from_bits(mask, s.n_conf()) : MaskVector::broadcast_all());
    for (int c = 0; c < cols; ++c) {
      int expect = 0;
      for (int n = 0; n < rows; ++n) {
        if (!m[static_cast<size_t>(n)]) continue;
        const int bit = s.cell(n, c) ? 1 : 0;
        const int xb = x[static_cast<size_t>(n)];
        expect += xnor ? (bit == xb) : (bit & xb);
      }
      // XNOR: unmasked rows past the matrix hold 0 cells and see x bit 0
      if (xnor) {
        int extra = 0;
        for (int n = rows; n < s.n_conf(); ++n) extra += mask.test(static_cast<size_t>(n)) ? 1 : 0;
        expect += extra;
      }
      ASSERT_EQ(sums.sums[static_cast<size_t>(c)], expect) << "trial " << trial << " column " << c;
    }
  }
}

TEST(CimaArray, GateBanks) {
  CimaState s;
  s.gate_banks(4, 4);
  EXPECT_EQ(s.n_conf(), 2304);
  s.gate_banks(1, 2);
  EXPECT_EQ(s.n_conf(), 576);
  EXPECT_EQ(s.m_phys(), 128);
  EXPECT_TRUE(s.bank_enabled(0, 1));
  EXPECT_FALSE(s.bank_enabled(1, 0));
  EXPECT_EQ(code_of([&] { s.gate_banks(1, 0); }), ErrorCode::QuantaOutOfRange);
  EXPECT_EQ(code_of([&] { s.gate_banks(5, 1); }), ErrorCode::QuantaOutOfRange);
}

TEST(CimaArray, GatedRowsAndColumnsContributeNothing) {
  CimaState s;
  SegmentPayload ones;
  ones.set();
  for (int k = 0; k < kSegmentCount; ++k) s.write_segment(k, ones);
  s.gate_banks(2, 1);
  BitPlaneVector x;
  x.format = kTwos1;
  x.bits.set();
  const auto sums = evaluate(s, x, ComputeMode::And, MaskVector::broadcast_all());
  EXPECT_EQ(sums.sums[0], 1152);
  EXPECT_EQ(sums.sums[63], 1152);
  EXPECT_EQ(sums.sums[64], 0);
  EXPECT_EQ(sums.n_nonmasked, 1152);
}

TEST(CimaArray, ModeFormatMismatch) {
  CimaState s;
  EXPECT_EQ(code_of([&] { evaluate(s, plane_of({1}, kTwos1), ComputeMode::Xnor, MaskVector::broadcast_all()); }),
            ErrorCode::ModeFormatMismatch);
}

TEST(CimaArray, TallyMustAgreeWithMask) {
  CimaState s;
  MaskVector m = MaskVector::broadcast_all();
  m.zero_tally = 3;
  EXPECT_EQ(code_of([&] { evaluate(s, plane_of({1}, kXnor1), ComputeMode::Xnor, m); }),
            ErrorCode::InvariantViolation);
}

TEST(CimaArray, LevelCountAndConsistency) {
  std::mt19937_64 rng(8);
  CimaState s;
  const int n = 40;
  const auto a = test::random_matrix(rng, 4, static_cast<size_t>(n), kXnor1);
  load_matrix(s, a);
  s.gate_banks(1, 1);
  RowBits mask;
  for (int k = 0; k < n; ++k) mask.set(static_cast<size_t>(k));
  const MaskVector mv = MaskVector::from_bits(mask, s.n_conf());

  // level count: at most n + 1 distinct sums per column over many inputs
  std::set<int> levels;
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 2000; ++t) {
    std::vector<int> x(static_cast<size_t>(n));
    for (auto& b : x) b = coin(rng);
    levels.insert(evaluate(s, plane_of(x, kXnor1), ComputeMode::Xnor, mv).sums[0]);
  }
  EXPECT_LE(levels.size(), static_cast<size_t>(n + 1));
  for (const int v : levels) EXPECT_TRUE(v >= 0 && v <= n);

  // all-ones x: XNOR gives popcount(a); all-zero x: XNOR gives n - popcount
  const auto ones = evaluate(s, plane_of(std::vector<int>(static_cast<size_t>(n), 1), kXnor1), ComputeMode::Xnor, mv);
  const auto zeros = evaluate(s, plane_of({}, kXnor1), ComputeMode::Xnor, mv);
  for (int c = 0; c < 4; ++c) {
    int pop = 0;
    for (int k = 0; k < n; ++k) pop += s.cell(k, c) ? 1 : 0;
    EXPECT_EQ(ones.sums[static_cast<size_t>(c)], pop);
    EXPECT_EQ(zeros.sums[static_cast<size_t>(c)], n - pop);
  }
}

TEST(CimaArray, MaskingMonotone) {
  std::mt19937_64 rng(9);
  CimaState s;
  const int n = 300;
  load_matrix(s, test::random_matrix(rng, 8, static_cast<size_t>(n), kXnor1));
  s.gate_banks(1, 1);
  std::bernoulli_distribution coin(0.5);
  std::vector<int> x(static_cast<size_t>(n));
  for (auto& b : x) b = coin(rng);
  RowBits mask;
  for (int k = 0; k < n; ++k) mask.set(static_cast<size_t>(k));
  auto before = evaluate(s, plane_of(x, kXnor1), ComputeMode::Xnor, MaskVector::from_bits(mask, s.n_conf()));
  for (int step = 0; step < 50; ++step) {
    mask.reset(static_cast<size_t>(std::uniform_int_distribution<int>(0, n - 1)(rng)));
    const auto after = evaluate(s, plane_of(x, kXnor1), ComputeMode::Xnor, MaskVector::from_bits(mask, s.n_conf()));
    EXPECT_GE(before.n_nonmasked - after.n_nonmasked, 0);
    EXPECT_LE(before.n_nonmasked - after.n_nonmasked, 1);
    for (int c = 0; c < 8; ++c) EXPECT_LE(after.sums[static_cast<size_t>(c)], before.sums[static_cast<size_t>(c)]);
    before = after;
  }
}
