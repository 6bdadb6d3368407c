/* SPDX-License-Identifier: Apache-2.0 */
#include <gtest/gtest.h>

#include <set>

#include "cimu/numfmt.hpp"
#include "test_util.hpp"

using namespace cimu;
using cimu::test::code_of;

namespace {

// Value of an MSB-first bit sequence, computed without the library.
int32_t twos_value(const BitSequence& bits) {
  const int b = static_cast<int>(bits.size());
  int32_t v = bits[0] ? -(1 << (b - 1)) : 0;
  for (int k = 1; k < b; ++k) v += bits[static_cast<size_t>(k)] << (b - 1 - k);
  return v;
}

int32_t xnor_value(const BitSequence& bits) {
  const int b = static_cast<int>(bits.size());
  int32_t v = 0;
  for (int k = 0; k < b; ++k) {
    const int32_t w = (k == b - 1) ? 1 : (1 << (b - 2 - k));
    v += bits[static_cast<size_t>(k)] ? w : -w;
  }
  return v;
}

BitSequence bits_of(unsigned pattern, int width) {
  BitSequence bits(static_cast<size_t>(width));
  for (int k = 0; k < width; ++k) bits[static_cast<size_t>(k)] = (pattern >> (width - 1 - k)) & 1u;
  return bits;
}

}  // namespace

TEST(NumFmt, DecomposeExamples) {
  EXPECT_EQ(decompose(-3, NumberFormat::twos(4)), (BitSequence{1, 1, 0, 1}));
  EXPECT_EQ(decompose(0, NumberFormat::xnor(2)), (BitSequence{1, 0}));
  EXPECT_EQ(decompose(4, NumberFormat::xnor(3)), (BitSequence{1, 1, 1}));
}

TEST(NumFmt, ComposeExamples) {
  const BitSequence a{1, 1, 0, 1}, b{1, 0}, c{0, 0, 0};
  EXPECT_EQ(compose(a, NumberFormat::twos(4)), -3);
  EXPECT_EQ(compose(b, NumberFormat::xnor(2)), 0);
  EXPECT_EQ(compose(c, NumberFormat::xnor(3)), -4);
}

TEST(NumFmt, BitWeightExamples) {
  EXPECT_EQ(bit_weights(NumberFormat::twos(4)), (std::vector<int32_t>{-8, 4, 2, 1}));
  EXPECT_EQ(bit_weights(NumberFormat::xnor(3)), (std::vector<int32_t>{2, 1, 1}));
  EXPECT_EQ(bit_weights(NumberFormat::xnor(1)), (std::vector<int32_t>{1}));
  EXPECT_EQ(bit_weights(NumberFormat::twos(1)), (std::vector<int32_t>{-1}));
}

TEST(NumFmt, RoundTripEveryFormatExhaustive) {
  for (const FormatKind kind : {FormatKind::TwosComplement, FormatKind::XnorSigned}) {
    for (int b = 1; b <= 8; ++b) {
      const NumberFormat fmt(kind, b);
      for (const int32_t v : fmt.representable_values()) {
        const auto bits = decompose(v, fmt);
        ASSERT_EQ(bits.size(), static_cast<size_t>(b));
        ASSERT_EQ(compose(bits, fmt), v) << fmt.to_string() << " v=" << v;
        // weighted-sum definition, evaluated independently
        ASSERT_EQ(kind == FormatKind::TwosComplement ? twos_value(bits) : xnor_value(bits), v);
      }
    }
  }
}

TEST(NumFmt, RepresentableSetsMatchDefinition) {
  for (int b = 1; b <= 8; ++b) {
    std::vector<int32_t> twos, xnor;
    for (int32_t v = -(1 << (b - 1)); v <= (1 << (b - 1)) - 1; ++v) twos.push_back(v);
    if (b == 1) {
      xnor = {-1, 1};
    } else {
      for (int32_t v = -(1 << (b - 1)); v <= (1 << (b - 1)); v += 2) xnor.push_back(v);
    }
    EXPECT_EQ(NumberFormat::twos(b).representable_values(), twos);
    EXPECT_EQ(NumberFormat::xnor(b).representable_values(), xnor);
  }
}

TEST(NumFmt, XnorImageIsTheEvenGrid) {
  for (int b = 1; b <= 8; ++b) {
    const NumberFormat fmt = NumberFormat::xnor(b);
    std::set<int32_t> image;
    for (unsigned p = 0; p < (1u << b); ++p) image.insert(compose(bits_of(p, b), fmt));
    std::set<int32_t> expected;
    if (b == 1) {
      expected = {-1, 1};
    } else {
      for (int32_t v = -(1 << (b - 1)); v <= (1 << (b - 1)); v += 2) expected.insert(v);
      EXPECT_EQ(image.size(), static_cast<size_t>((1 << (b - 1)) + 1));
    }
    EXPECT_EQ(image, expected) << "B=" << b;
  }
}

TEST(NumFmt, TwosMatchesMachineBits) {
  for (int b = 1; b <= 8; ++b) {
    const NumberFormat fmt = NumberFormat::twos(b);
    for (const int32_t v : fmt.representable_values()) {
      const auto bits = decompose(v, fmt);
      for (int k = 0; k < b; ++k) {
        ASSERT_EQ(bits[static_cast<size_t>(k)], static_cast<uint8_t>((v >> (b - 1 - k)) & 1));
      }
      ASSERT_EQ(encode_code(v, fmt), static_cast<uint8_t>(static_cast<uint32_t>(v) & ((1u << b) - 1)));
    }
  }
}

TEST(NumFmt, CanonicalXnorZero) {
  // trailing pair (+1, -1) with every higher bit balancing to zero
  EXPECT_EQ(decompose(0, NumberFormat::xnor(2)), (BitSequence{1, 0}));
  for (int b = 2; b <= 8; ++b) {
    const auto bits = decompose(0, NumberFormat::xnor(b));
    EXPECT_EQ(xnor_value(bits), 0);
    EXPECT_EQ(bits.back(), 0);
  }
}

TEST(NumFmt, RedundantXnorEncodingsAccepted) {
  const BitSequence alt{0, 1};
  EXPECT_EQ(compose(alt, NumberFormat::xnor(2)), 0);
}

TEST(NumFmt, CodesRoundTripAndPlaneWeights) {
  for (const FormatKind kind : {FormatKind::TwosComplement, FormatKind::XnorSigned}) {
    for (int b = 1; b <= 8; ++b) {
      const NumberFormat fmt(kind, b);
      const auto w = bit_weights(fmt);
      for (int i = 0; i < b; ++i) EXPECT_EQ(plane_weight(fmt, i), w[static_cast<size_t>(b - 1 - i)]);
      for (const int32_t v : fmt.representable_values()) {
        const uint8_t code = encode_code(v, fmt);
        ASSERT_EQ(decode_code(code, fmt), v);
        const auto bits = decompose(v, fmt);
        for (int k = 0; k < b; ++k) ASSERT_EQ((code >> (b - 1 - k)) & 1, bits[static_cast<size_t>(k)]);
      }
    }
  }
}

TEST(NumFmt, Errors) {
  EXPECT_EQ(code_of([] { decompose(3, NumberFormat::xnor(3)); }), ErrorCode::UnrepresentableValue);
  EXPECT_EQ(code_of([] { decompose(0, NumberFormat::xnor(1)); }), ErrorCode::UnrepresentableValue);
  EXPECT_EQ(code_of([] { decompose(8, NumberFormat::twos(4)); }), ErrorCode::UnrepresentableValue);
  EXPECT_EQ(code_of([] { decompose(-9, NumberFormat::twos(4)); }), ErrorCode::UnrepresentableValue);
  EXPECT_EQ(code_of([] { decompose(6, NumberFormat::xnor(3)); }), ErrorCode::UnrepresentableValue);
  EXPECT_EQ(code_of([] {
              const BitSequence bits{1, 0, 1};
              compose(bits, NumberFormat::twos(4));
            }),
            ErrorCode::WidthMismatch);
  EXPECT_EQ(code_of([] { NumberFormat::twos(0); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { NumberFormat::xnor(9); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { NumberFormat::parse("float:8"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { decode_code(0x10, NumberFormat::twos(4)); }), ErrorCode::ElementTooWide);
  EXPECT_EQ(code_of([] { plane_weight(NumberFormat::twos(4), 4); }), ErrorCode::PlaneOutOfRange);
}

TEST(NumFmt, ParseAndPrint) {
  EXPECT_EQ(NumberFormat::parse("twos:4"), NumberFormat::twos(4));
  EXPECT_EQ(NumberFormat::parse("xnor:1"), NumberFormat::xnor(1));
  EXPECT_EQ(NumberFormat::xnor(3).to_string(), "xnor:3");
}
