/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Lowering of quantized CNN descriptions (CONV3 / FC / POOL2 / BATCHNORM /
// ACT) onto the 2304 x 256 array: tiling, format and conversion-path
// selection, ADC full-scale choice, batch-norm folding, stride-reuse
// scheduling and host-op emission.
//
// Network description, one statement per line, '#' starts a comment:
//
//   network <name>
//   input height=32 width=32 channels=3 format=xnor:1
//   CONV3 out=128 ba=1 bx=1 mode=xnor [stride=1] [weights=<tensor file>]
//   BATCHNORM [params=<text file>] [mean=0 std=1 gamma=1 beta=0] [shift=12]
//   ACT fn=sign|relu|none
//   POOL2 op=max|avg
//   FC out=10 ba=1 bx=1 mode=xnor [weights=<tensor file>]
//
// Conv weight files are [out, ky, kx, in]; FC weight files are [out, in] with
// inputs flattened height-major, then width, then channel.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cimu/near_mem.hpp"
#include "cimu/plan.hpp"
#include "cimu/tensor.hpp"

namespace cimu {

enum class LayerKind { Conv3, Fc, Pool2, BatchNorm, Act };
enum class PoolKind { Max, Avg };

const char* to_string(LayerKind kind);

struct BnChannel {
  double mean = 0.0;
  double stddev = 1.0;
  double gamma = 1.0;
  double beta = 0.0;
};

struct LayerSpec {
  LayerKind kind = LayerKind::Fc;
  int out_channels = 0;
  int ba = 1;
  int bx = 1;
  ComputeMode mode = ComputeMode::Xnor;
  int kernel = 3;
  int stride = 1;
  std::string weights_path;

  PoolKind pool = PoolKind::Max;
  Activation act = Activation::None;

  std::vector<BnChannel> bn;  // one entry = shared by every channel
  int bn_shift = 12;

  NumberFormat fmt_a() const;
  NumberFormat fmt_x() const;
};

struct NetworkGraph {
  std::string name = "network";
  int height = 0;
  int width = 0;
  int channels = 0;
  NumberFormat input_format = NumberFormat::xnor(1);
  std::vector<LayerSpec> layers;
};

/// Throws ParseError. Relative paths resolve against `base_dir`.
NetworkGraph parse_network(std::string_view text, const std::filesystem::path& base_dir = {});
NetworkGraph load_network(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct FullScaleChoice {
  int full_scale = 1;
  bool lossy = false;
};

/// F = min(rows, 255) when the column sum is statically bounded by 255
/// (rows <= 255, or at least rows - 255 guaranteed zeros), else F = rows.
FullScaleChoice choose_full_scale(int rows, int guaranteed_zeros);

struct RowTile {
  int offset = 0;
  int rows = 0;
};

std::vector<RowTile> tile_rows(int total_rows, int max_rows = kRows);

struct ThresholdFold {
  int threshold_code = 0;
  bool negate = false;  // weights of this output are negated
};

/// Comparator threshold reproducing sign(batchnorm(scale * y)) >= 0 for an
/// XNOR column with `n_nominal` unmasked rows.
ThresholdFold fold_batchnorm_threshold(const BnChannel& bn, double scale, int n_nominal,
                                       int full_scale);

/// Integer-affine (multiplier, offset, shift) form of batchnorm(scale * y).
BatchNormOp fold_batchnorm_affine(std::span<const BnChannel> bn, int channels, double scale,
                                  int shift);

struct QuantizedReal {
  std::vector<int32_t> values;
  int exponent = 0;  // real ~= value * 2^exponent
};

/// Power-of-two scaling onto the format's grid (even grid for XnorSigned).
QuantizedReal quantize_real(std::span<const double> values, const NumberFormat& fmt);

/// Clamp / round a datapath value onto `fmt`. XNOR zeros stay zero.
int32_t requantize(int64_t value, const NumberFormat& fmt);

// ---------------------------------------------------------------------------

enum class HostStageKind { Pool, PostOps, Requantize };

struct HostStage {
  HostStageKind kind = HostStageKind::Pool;
  PoolKind pool = PoolKind::Max;
  PostOps ops;
  int width = 32;  // saturation width for PostOps
  NumberFormat format = NumberFormat::twos(8);
};

struct LoweredLayer {
  int index = 0;
  std::string label;
  LayerKind kind = LayerKind::Fc;
  int in_h = 1, in_w = 1, in_c = 0;
  int out_h = 1, out_w = 1, out_c = 0;
  int stride = 1;
  int pad = 0;

  NumberFormat fmt_a = NumberFormat::xnor(1);
  NumberFormat fmt_x = NumberFormat::xnor(1);
  ComputeMode mode = ComputeMode::Xnor;
  ConversionPath path = ConversionPath::Adc;
  bool row_tiled = false;
  bool stride_reuse = false;
  int output_width = 16;

  QuantizedTensor weights;  // [out_c x N], rows in array order
  std::vector<ExecutionPlan> tiles;
  PostOps datapath_ops;          // ADC path, per output channel
  std::vector<int> thresholds;   // ABN path, per output channel
  std::vector<HostStage> host_stages;

  int inputs() const noexcept { return kind == LayerKind::Conv3 ? 9 * in_c : in_h * in_w * in_c; }
  int final_h = 1, final_w = 1;  // after host pooling
};

struct LoweredNetwork {
  std::string name;
  int height = 0, width = 0, channels = 0;
  NumberFormat input_format = NumberFormat::xnor(1);
  std::vector<LoweredLayer> layers;

  std::vector<ExecutionPlan> plans() const;
};

struct LowerOptions {
  bool dry_run = false;         // shapes only, no weights
  uint64_t seed = 1;            // random weights when no file is given
  int fixed_full_scale = 0;     // 0 = automatic
};

/// Tiles a CONV3 layer on an in_h x in_w x in_c input. Throws UnsupportedKernel.
LoweredLayer lower_conv3(const LayerSpec& spec, int in_h, int in_w, int in_c);
LoweredLayer lower_fc(const LayerSpec& spec, int in_features);

/// Throws ShapeMismatch, UnsupportedKernel, ParseError / IoError for weights.
LoweredNetwork lower_network(const NetworkGraph& graph, const LowerOptions& options = {});

/// Reorders [out, ky, kx, in] conv weights into array row order (kx, ky, c).
std::vector<int32_t> conv_weights_to_rows(std::span<const int32_t> weights, int out_c, int in_c);

}  // namespace cimu
