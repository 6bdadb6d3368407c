/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Digital datapath behind the converters: shift-and-add recombination of
// digitized bit-plane column sums, then scale / bias / folded batch-norm /
// activation, saturating into a 16- or 32-bit output word.

#include <cstdint>
#include <variant>
#include <vector>

#include "cimu/cima_array.hpp"
#include "cimu/converters.hpp"
#include "cimu/numfmt.hpp"

namespace cimu {

struct RecombineContext {
  NumberFormat fmt_a = NumberFormat::twos(1);
  NumberFormat fmt_x = NumberFormat::twos(1);
  ComputeMode mode = ComputeMode::And;
  std::vector<int32_t> x_weights;  // indexed by streamed plane (code bit)
  std::vector<int32_t> a_weights;  // indexed by column-map plane (MSB first)
  std::vector<int> n_nonmasked;    // per streamed plane

  static RecombineContext make(const NumberFormat& fmt_a, const NumberFormat& fmt_x,
                               ComputeMode mode, std::vector<int> n_nonmasked);
};

/// XNOR: 2*s - n_nonmasked; AND: s.
int64_t signed_plane_value(int64_t s_hat, ComputeMode mode, int n_nonmasked);

/// codes[i][j]: ADC code of streamed plane i on matrix plane j of one output.
/// Throws PlaneCountMismatch.
int64_t recombine(const std::vector<std::vector<int>>& codes, const RecombineContext& ctx,
                  const AdcModel& adc);

enum class Activation { None, Relu, Sign };

const char* to_string(Activation fn);
Activation parse_activation(std::string_view text);

/// y * gamma / 2^shift, rounded half up. One gamma entry means global.
struct ScaleOp {
  std::vector<int32_t> gamma;
  int shift = 0;
};

struct BiasOp {
  std::vector<int64_t> beta;
};

/// (y * multiplier + offset) / 2^shift, rounded half up.
struct BatchNormOp {
  std::vector<int32_t> multiplier;
  std::vector<int64_t> offset;
  int shift = 0;
};

struct ActivationOp {
  Activation fn = Activation::None;
};

using PostOp = std::variant<ScaleOp, BiasOp, BatchNormOp, ActivationOp>;
using PostOps = std::vector<PostOp>;

inline constexpr int kMaxShift = 30;

struct OutputWord {
  int64_t value = 0;
  int width = 16;
};

/// Throws InvalidPostOps for empty parameter vectors, shifts outside
/// [0, 30], or per-output vectors shorter than `outputs`.
void validate_post_ops(const PostOps& ops, size_t outputs);

/// Applies `ops` in order for output `index`, saturating to `width` bits.
OutputWord apply_post_ops(int64_t y, const PostOps& ops, size_t index, int width);

/// 16 if bx + ba <= 5, else 32.
int output_width(int bx, int ba);

int64_t saturate(int64_t value, int width);

}  // namespace cimu
