/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/near_mem.hpp"

#include <algorithm>
#include <string>

#include "cimu/error.hpp"

namespace cimu {

RecombineContext RecombineContext::make(const NumberFormat& fmt_a, const NumberFormat& fmt_x,
                                        ComputeMode mode, std::vector<int> n_nonmasked) {
  if (mode != mode_for(fmt_a) || mode != mode_for(fmt_x)) {
    fail(ErrorCode::ModeFormatMismatch, std::string(to_string(mode)) + " mode with formats " +
                                            fmt_a.to_string() + " / " + fmt_x.to_string());
  }
  RecombineContext ctx;
  ctx.fmt_a = fmt_a;
  ctx.fmt_x = fmt_x;
  ctx.mode = mode;
  for (int i = 0; i < fmt_x.width(); ++i) ctx.x_weights.push_back(plane_weight(fmt_x, i));
  ctx.a_weights = bit_weights(fmt_a);
  ctx.n_nonmasked = std::move(n_nonmasked);
  return ctx;
}

int64_t signed_plane_value(int64_t s_hat, ComputeMode mode, int n_nonmasked) {
  return mode == ComputeMode::Xnor ? 2 * s_hat - n_nonmasked : s_hat;
}

int64_t recombine(const std::vector<std::vector<int>>& codes, const RecombineContext& ctx,
                  const AdcModel& adc) {
  const size_t bx = ctx.x_weights.size();
  const size_t ba = ctx.a_weights.size();
  if (codes.size() != bx || ctx.n_nonmasked.size() != bx) {
    fail(ErrorCode::PlaneCountMismatch, "expected " + std::to_string(bx) + " input planes, got " +
                                            std::to_string(codes.size()));
  }
  int64_t y = 0;
  for (size_t i = 0; i < bx; ++i) {
    if (codes[i].size() != ba) {
      fail(ErrorCode::PlaneCountMismatch, "expected " + std::to_string(ba) +
                                              " matrix planes, got " +
                                              std::to_string(codes[i].size()));
    }
    int64_t row = 0;
    for (size_t j = 0; j < ba; ++j) {
      const int64_t s_hat = adc_dequantize(codes[i][j], adc);
      row += ctx.a_weights[j] * signed_plane_value(s_hat, ctx.mode, ctx.n_nonmasked[i]);
    }
    y += ctx.x_weights[i] * row;
  }
  return y;
}

const char* to_string(Activation fn) {
  switch (fn) {
    case Activation::None: return "none";
    case Activation::Relu: return "relu";
    case Activation::Sign: return "sign";
  }
  return "none";
}

Activation parse_activation(std::string_view text) {
  if (text == "none") return Activation::None;
  if (text == "relu") return Activation::Relu;
  if (text == "sign") return Activation::Sign;
  fail(ErrorCode::ParseError, "unknown activation '" + std::string(text) + "'");
}

namespace {

int64_t shift_round(int64_t value, int shift) {
  if (shift == 0) return value;
  return (value + (int64_t{1} << (shift - 1))) >> shift;
}

template <typename T>
T pick(const std::vector<T>& values, size_t index) {
  return values.size() == 1 ? values.front() : values[index];
}

template <typename T>
void check_vector(const std::vector<T>& values, size_t outputs, const char* what) {
  if (values.empty()) fail(ErrorCode::InvalidPostOps, std::string(what) + " has no entries");
  if (values.size() != 1 && values.size() < outputs) {
    fail(ErrorCode::InvalidPostOps, std::string(what) + " has " + std::to_string(values.size()) +
                                        " entries for " + std::to_string(outputs) + " outputs");
  }
}

void check_shift(int shift) {
  if (shift < 0 || shift > kMaxShift) {
    fail(ErrorCode::InvalidPostOps, "shift " + std::to_string(shift) + " outside [0, 30]");
  }
}

}  // namespace

void validate_post_ops(const PostOps& ops, size_t outputs) {
  for (const auto& op : ops) {
    std::visit(
        [outputs](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, ScaleOp>) {
            check_vector(o.gamma, outputs, "scale");
            check_shift(o.shift);
          } else if constexpr (std::is_same_v<T, BiasOp>) {
            check_vector(o.beta, outputs, "bias");
          } else if constexpr (std::is_same_v<T, BatchNormOp>) {
            check_vector(o.multiplier, outputs, "batch-norm multiplier");
            check_vector(o.offset, outputs, "batch-norm offset");
            check_shift(o.shift);
          }
        },
        op);
  }
}

OutputWord apply_post_ops(int64_t y, const PostOps& ops, size_t index, int width) {
  if (width != 16 && width != 32) {
    fail(ErrorCode::InvalidPostOps, "output width must be 16 or 32");
  }
  validate_post_ops(ops, index + 1);
  int64_t v = y;
  for (const auto& op : ops) {
    if (const auto* s = std::get_if<ScaleOp>(&op)) {
      v = shift_round(v * pick(s->gamma, index), s->shift);
    } else if (const auto* b = std::get_if<BiasOp>(&op)) {
      v += pick(b->beta, index);
    } else if (const auto* bn = std::get_if<BatchNormOp>(&op)) {
      v = shift_round(v * pick(bn->multiplier, index) + pick(bn->offset, index), bn->shift);
    } else if (const auto* act = std::get_if<ActivationOp>(&op)) {
      if (act->fn == Activation::Relu) v = std::max<int64_t>(v, 0);
      if (act->fn == Activation::Sign) v = v >= 0 ? 1 : -1;
    }
  }
  return {saturate(v, width), width};
}

int output_width(int bx, int ba) { return bx + ba <= 5 ? 16 : 32; }

int64_t saturate(int64_t value, int width) {
  const int64_t hi = (int64_t{1} << (width - 1)) - 1;
  return std::clamp(value, -hi - 1, hi);
}

}  // namespace cimu
