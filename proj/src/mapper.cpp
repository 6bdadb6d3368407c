/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/mapper.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "cimu/converters.hpp"
#include "cimu/error.hpp"
#include "cimu/fileio.hpp"
#include "cimu/io_frontend.hpp"

namespace fs = std::filesystem;

namespace cimu {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv3: return "CONV3";
    case LayerKind::Fc: return "FC";
    case LayerKind::Pool2: return "POOL2";
    case LayerKind::BatchNorm: return "BATCHNORM";
    case LayerKind::Act: return "ACT";
  }
  return "?";
}

NumberFormat LayerSpec::fmt_a() const {
  return mode == ComputeMode::Xnor ? NumberFormat::xnor(ba) : NumberFormat::twos(ba);
}

NumberFormat LayerSpec::fmt_x() const {
  return mode == ComputeMode::Xnor ? NumberFormat::xnor(bx) : NumberFormat::twos(bx);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

bool is_mvm(LayerKind k) { return k == LayerKind::Conv3 || k == LayerKind::Fc; }

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream ss{std::string(line)};
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

int to_int(const std::string& text, const std::string& what, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::ParseError,
         "line " + std::to_string(line) + ": bad integer '" + text + "' for " + what);
  }
  return v;
}

double to_double(const std::string& text, const std::string& what, int line) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::ParseError,
       "line " + std::to_string(line) + ": bad number '" + text + "' for " + what);
}

using Args = std::map<std::string, std::string>;

Args parse_args(const std::vector<std::string>& tokens, const std::vector<std::string>& allowed,
                int line) {
  Args args;
  for (size_t k = 1; k < tokens.size(); ++k) {
    const auto eq = tokens[k].find('=');
    if (eq == std::string::npos || eq == 0) {
      fail(ErrorCode::ParseError,
           "line " + std::to_string(line) + ": expected key=value, got '" + tokens[k] + "'");
    }
    std::string key = tokens[k].substr(0, eq);
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(ErrorCode::ParseError,
           "line " + std::to_string(line) + ": unknown key '" + key + "' for " + tokens[0]);
    }
    if (!args.emplace(key, tokens[k].substr(eq + 1)).second) {
      fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": duplicate key '" + key + "'");
    }
  }
  return args;
}

std::string resolve(const std::string& path, const fs::path& base) {
  if (path.empty() || fs::path(path).is_absolute() || base.empty()) return path;
  return (base / path).string();
}

std::vector<BnChannel> read_bn_file(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<BnChannel> out;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 4) {
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) +
                                      ": expected 'mean std gamma beta'");
    }
    BnChannel ch{to_double(tokens[0], "mean", line_no), to_double(tokens[1], "std", line_no),
                 to_double(tokens[2], "gamma", line_no), to_double(tokens[3], "beta", line_no)};
    if (!(ch.stddev > 0)) fail(ErrorCode::ParseError, "batch-norm std must be positive");
    out.push_back(ch);
  }
  if (out.empty()) fail(ErrorCode::ParseError, path.string() + " has no batch-norm rows");
  return out;
}

}  // namespace

NetworkGraph parse_network(std::string_view text, const fs::path& base_dir) {
  NetworkGraph g;
  bool have_input = false;
  std::istringstream lines{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(lines, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    const auto tokens = split_ws(raw);
    if (tokens.empty()) continue;
    const std::string& head = tokens[0];

    if (head == "network") {
      if (tokens.size() != 2) fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": network <name>");
      g.name = tokens[1];
      continue;
    }
    if (head == "input") {
      auto a = parse_args(tokens, {"height", "width", "channels", "format"}, line_no);
      for (const char* key : {"height", "width", "channels", "format"}) {
        if (!a.count(key)) fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": input needs " + key);
      }
      g.height = to_int(a["height"], "height", line_no);
      g.width = to_int(a["width"], "width", line_no);
      g.channels = to_int(a["channels"], "channels", line_no);
      g.input_format = NumberFormat::parse(a["format"]);
      if (g.height < 1 || g.width < 1 || g.channels < 1) {
        fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": input dimensions must be positive");
      }
      have_input = true;
      continue;
    }

    LayerSpec spec;
    if (head == "CONV3" || head == "FC") {
      spec.kind = head == "CONV3" ? LayerKind::Conv3 : LayerKind::Fc;
      std::vector<std::string> allowed{"out", "ba", "bx", "mode", "weights"};
      if (spec.kind == LayerKind::Conv3) {
        allowed.push_back("stride");
        allowed.push_back("kernel");
      }
      auto a = parse_args(tokens, allowed, line_no);
      if (!a.count("out")) fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + head + " needs out=");
      spec.out_channels = to_int(a["out"], "out", line_no);
      if (spec.out_channels < 1) fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": out must be positive");
      if (a.count("ba")) spec.ba = to_int(a["ba"], "ba", line_no);
      if (a.count("bx")) spec.bx = to_int(a["bx"], "bx", line_no);
      if (spec.ba < kMinWidth || spec.ba > kMaxWidth || spec.bx < kMinWidth || spec.bx > kMaxWidth) {
        fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": ba/bx must be in 1..8");
      }
      if (a.count("mode")) spec.mode = parse_mode(a["mode"]);
      if (a.count("stride")) spec.stride = to_int(a["stride"], "stride", line_no);
      if (a.count("kernel")) spec.kernel = to_int(a["kernel"], "kernel", line_no);
      if (a.count("weights")) spec.weights_path = resolve(a["weights"], base_dir);
    } else if (head == "BATCHNORM") {
      spec.kind = LayerKind::BatchNorm;
      auto a = parse_args(tokens, {"params", "mean", "std", "gamma", "beta", "shift"}, line_no);
      if (a.count("params")) {
        spec.bn = read_bn_file(resolve(a["params"], base_dir));
      } else {
        BnChannel ch;
        if (a.count("mean")) ch.mean = to_double(a["mean"], "mean", line_no);
        if (a.count("std")) ch.stddev = to_double(a["std"], "std", line_no);
        if (a.count("gamma")) ch.gamma = to_double(a["gamma"], "gamma", line_no);
        if (a.count("beta")) ch.beta = to_double(a["beta"], "beta", line_no);
        if (!(ch.stddev > 0)) fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": std must be positive");
        spec.bn = {ch};
      }
      if (a.count("shift")) spec.bn_shift = to_int(a["shift"], "shift", line_no);
      if (spec.bn_shift < 0 || spec.bn_shift > kMaxShift) {
        fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": shift outside 0..30");
      }
    } else if (head == "ACT") {
      spec.kind = LayerKind::Act;
      auto a = parse_args(tokens, {"fn"}, line_no);
      if (!a.count("fn")) fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": ACT needs fn=");
      spec.act = parse_activation(a["fn"]);
    } else if (head == "POOL2") {
      spec.kind = LayerKind::Pool2;
      auto a = parse_args(tokens, {"op"}, line_no);
      const std::string op = a.count("op") ? a["op"] : "max";
      if (op == "max") spec.pool = PoolKind::Max;
      else if (op == "avg") spec.pool = PoolKind::Avg;
      else fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": POOL2 op must be max or avg");
    } else {
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": unknown statement '" + head + "'");
    }
    if (g.layers.empty() && !is_mvm(spec.kind)) {
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + head + " must follow CONV3 or FC");
    }
    g.layers.push_back(std::move(spec));
  }
  if (!have_input) fail(ErrorCode::ParseError, "network description lacks an input statement");
  if (g.layers.empty()) fail(ErrorCode::ParseError, "network description has no layers");
  return g;
}

NetworkGraph load_network(const fs::path& path) {
  return parse_network(read_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Folding, tiling, quantization

FullScaleChoice choose_full_scale(int rows, int guaranteed_zeros) {
  if (rows <= kAdcMaxCode) return {std::max(rows, 1), false};
  if (guaranteed_zeros >= rows - kAdcMaxCode) return {kAdcMaxCode, false};
  return {std::min(rows, kMaxFullScale), true};
}

std::vector<RowTile> tile_rows(int total_rows, int max_rows) {
  if (total_rows <= 0 || max_rows <= 0) fail(ErrorCode::InvalidConfig, "row tiling needs positive sizes");
  std::vector<RowTile> tiles;
  for (int offset = 0; offset < total_rows; offset += max_rows) {
    tiles.push_back({offset, std::min(max_rows, total_rows - offset)});
  }
  return tiles;
}

ThresholdFold fold_batchnorm_threshold(const BnChannel& bn, double scale, int n_nominal,
                                       int full_scale) {
  // batchnorm(scale*y) = a*y + b >= 0
  const double a = bn.gamma / bn.stddev * scale;
  const double b = bn.beta - bn.gamma * bn.mean / bn.stddev;
  ThresholdFold out;
  if (a == 0.0) {
    out.threshold_code = b >= 0 ? 0 : kDacMaxCode;
    return out;
  }
  double theta = -b / a;  // y >= theta (a > 0) or y <= theta (a < 0)
  if (a < 0) {
    out.negate = true;
    theta = -theta;
  }
  // XNOR: y = 2s - n, so y >= theta  <=>  s >= (theta + n) / 2
  const double crossing = (theta + n_nominal) / 2.0;
  const double code = std::floor(kDacMaxCode * crossing / full_scale + 0.5);
  out.threshold_code = static_cast<int>(std::clamp(code, 0.0, static_cast<double>(kDacMaxCode)));
  return out;
}

BatchNormOp fold_batchnorm_affine(std::span<const BnChannel> bn, int channels, double scale,
                                  int shift) {
  if (bn.empty()) fail(ErrorCode::InvalidPostOps, "batch norm without parameters");
  if (bn.size() != 1 && static_cast<int>(bn.size()) != channels) {
    fail(ErrorCode::ShapeMismatch, "batch norm has " + std::to_string(bn.size()) +
                                       " channels, layer has " + std::to_string(channels));
  }
  BatchNormOp op;
  op.shift = shift;
  const double unit = std::ldexp(1.0, shift);
  for (const auto& ch : bn) {
    const double a = ch.gamma / ch.stddev * scale;
    const double b = ch.beta - ch.gamma * ch.mean / ch.stddev;
    op.multiplier.push_back(static_cast<int32_t>(std::llround(a * unit)));
    op.offset.push_back(std::llround(b * unit));
  }
  return op;
}

QuantizedReal quantize_real(std::span<const double> values, const NumberFormat& fmt) {
  QuantizedReal out;
  double peak = 0.0;
  for (const double v : values) peak = std::max(peak, std::abs(v));
  const double limit = fmt.kind() == FormatKind::TwosComplement
                           ? std::max(1.0, static_cast<double>(fmt.max_value()))
                           : static_cast<double>(fmt.max_value());
  // smallest exponent with peak / 2^e <= limit
  int e = peak > 0 ? static_cast<int>(std::ceil(std::log2(peak / limit))) : 0;
  while (peak / std::ldexp(1.0, e) > limit) ++e;
  while (peak > 0 && peak / std::ldexp(1.0, e - 1) <= limit) --e;
  out.exponent = e;
  for (const double v : values) {
    const double scaled = v / std::ldexp(1.0, e);
    int32_t q;
    if (fmt.kind() == FormatKind::XnorSigned && fmt.width() == 1) {
      q = scaled >= 0 ? 1 : -1;
    } else if (fmt.kind() == FormatKind::XnorSigned) {
      q = 2 * static_cast<int32_t>(std::floor(scaled / 2.0 + 0.5));
    } else {
      q = static_cast<int32_t>(std::floor(scaled + 0.5));
    }
    out.values.push_back(std::clamp(q, fmt.min_value(), fmt.max_value()));
  }
  return out;
}

int32_t requantize(int64_t value, const NumberFormat& fmt) {
  if (fmt.kind() == FormatKind::TwosComplement) {
    return static_cast<int32_t>(std::clamp<int64_t>(value, fmt.min_value(), fmt.max_value()));
  }
  if (fmt.width() == 1) return value > 0 ? 1 : (value < 0 ? -1 : 0);
  const int64_t clamped = std::clamp<int64_t>(value, fmt.min_value(), fmt.max_value());
  // nearest even, ties upward
  const int64_t half = clamped >= -1 ? (clamped + 1) / 2 : -((-clamped) / 2);
  return static_cast<int32_t>(2 * half);
}

std::vector<int32_t> conv_weights_to_rows(std::span<const int32_t> weights, int out_c, int in_c) {
  const size_t per_out = static_cast<size_t>(9 * in_c);
  if (weights.size() != per_out * static_cast<size_t>(out_c)) {
    fail(ErrorCode::ShapeMismatch, "conv weights do not match [out, 3, 3, in]");
  }
  std::vector<int32_t> rows(weights.size());
  for (int o = 0; o < out_c; ++o) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        for (int c = 0; c < in_c; ++c) {
          const size_t src = static_cast<size_t>(((o * 3 + ky) * 3 + kx) * in_c + c);
          const size_t dst = static_cast<size_t>(o) * per_out + static_cast<size_t>(kx * 3 * in_c + ky * in_c + c);
          rows[dst] = weights[src];
        }
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Lowering

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

/// Share of window elements that fall into the zero padding, averaged over
/// all output positions.
double padding_fraction(int in_h, int in_w, int out_h, int out_w, int stride) {
  double outside = 0;
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      int valid = 0;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int y = oy * stride + ky - 1;
          const int x = ox * stride + kx - 1;
          valid += (y >= 0 && y < in_h && x >= 0 && x < in_w) ? 1 : 0;
        }
      }
      outside += 9 - valid;
    }
  }
  return outside / (9.0 * out_h * out_w);
}

LoweredLayer tile_layer(LoweredLayer layer, int reuse_elements, double data_zero_fraction) {
  const int n = layer.inputs();
  const int per_tile = kColumns / layer.fmt_a.width();
  const auto row_tiles = tile_rows(n);
  const int col_tiles = ceil_div(layer.out_c, per_tile);
  layer.row_tiled = row_tiles.size() > 1;
  layer.stride_reuse = layer.kind == LayerKind::Conv3 && layer.stride == 1 && !layer.row_tiled;
  layer.output_width = output_width(layer.fmt_x.width(), layer.fmt_a.width());
  const int64_t positions = int64_t{layer.out_h} * layer.out_w;

  int tile_index = 0;
  for (int ct = 0; ct < col_tiles; ++ct) {
    for (const auto& rt : row_tiles) {
      ExecutionPlan p;
      p.lowered = true;
      p.layer = layer.index;
      p.tile = tile_index++;
      p.label = layer.label + ".t" + std::to_string(p.tile);
      p.fmt_a = layer.fmt_a;
      p.fmt_x = layer.fmt_x;
      p.mode = layer.mode;
      p.path = ConversionPath::Adc;
      p.row_offset = rt.offset;
      p.rows = rt.rows;
      p.output_offset = ct * per_tile;
      p.logical_outputs = std::min(per_tile, layer.out_c - p.output_offset);
      p.row_quanta = ceil_div(p.rows, kRowQuantum);
      p.col_quanta = ceil_div(p.physical_columns(), kColumnQuantum);
      const auto fs = choose_full_scale(p.rows, 0);
      p.full_scale = fs.full_scale;
      p.lossy = fs.lossy;
      p.segments = ceil_div(p.rows, kSegmentBits / kColumns);
      p.mvm_count = positions;
      p.reload_mvms = layer.stride_reuse ? layer.out_h : positions;
      p.reload_words = static_cast<int>(words_for(static_cast<size_t>(p.rows), layer.fmt_x.width()));
      p.reuse_words = static_cast<int>(words_for(static_cast<size_t>(reuse_elements), layer.fmt_x.width()));
      p.output_bits = layer.row_tiled ? 32 : layer.output_width;
      const double padding_rows = p.n_conf() - p.rows;
      p.zero_fraction = (padding_rows + data_zero_fraction * p.rows) / p.n_conf();
      p.row_tiled = layer.row_tiled;
      p.col_tiled = col_tiles > 1;
      if (p.lossy) p.notes.push_back("lossy: column sums may exceed the 8-b ADC range (F=" + std::to_string(p.full_scale) + ")");
      if (p.row_tiled) p.notes.push_back("extension: row tiling with host partial sums");
      if (p.col_tiled) p.notes.push_back("extension: column tiling with matrix reload");
      layer.tiles.push_back(std::move(p));
    }
  }
  return layer;
}

}  // namespace

LoweredLayer lower_conv3(const LayerSpec& spec, int in_h, int in_w, int in_c) {
  if (spec.kernel != 3) {
    fail(ErrorCode::UnsupportedKernel, "only 3x3 kernels are supported, got " + std::to_string(spec.kernel));
  }
  if (spec.stride != 1 && spec.stride != 2) {
    fail(ErrorCode::UnsupportedKernel, "conv stride must be 1 or 2, got " + std::to_string(spec.stride));
  }
  LoweredLayer layer;
  layer.kind = LayerKind::Conv3;
  layer.label = "conv3";
  layer.in_h = in_h;
  layer.in_w = in_w;
  layer.in_c = in_c;
  layer.stride = spec.stride;
  layer.pad = 1;
  layer.out_h = (in_h + 2 - 3) / spec.stride + 1;
  layer.out_w = (in_w + 2 - 3) / spec.stride + 1;
  layer.out_c = spec.out_channels;
  layer.final_h = layer.out_h;
  layer.final_w = layer.out_w;
  layer.fmt_a = spec.fmt_a();
  layer.fmt_x = spec.fmt_x();
  layer.mode = spec.mode;
  const double pad = padding_fraction(in_h, in_w, layer.out_h, layer.out_w, spec.stride);
  return tile_layer(std::move(layer), 3 * in_c, pad);
}

LoweredLayer lower_fc(const LayerSpec& spec, int in_features) {
  LoweredLayer layer;
  layer.kind = LayerKind::Fc;
  layer.label = "fc";
  layer.in_h = 1;
  layer.in_w = 1;
  layer.in_c = in_features;
  layer.out_c = spec.out_channels;
  layer.fmt_a = spec.fmt_a();
  layer.fmt_x = spec.fmt_x();
  layer.mode = spec.mode;
  return tile_layer(std::move(layer), in_features, 0.0);
}

namespace {

std::vector<PostOp> fold_chain(const std::vector<const LayerSpec*>& chain, int channels) {
  PostOps ops;
  for (const LayerSpec* s : chain) {
    if (s->kind == LayerKind::BatchNorm) {
      ops.emplace_back(fold_batchnorm_affine(s->bn, channels, 1.0, s->bn_shift));
    } else if (s->kind == LayerKind::Act) {
      ops.emplace_back(ActivationOp{s->act});
    }
  }
  return ops;
}

bool bn_non_decreasing(const LayerSpec& s) {
  return std::all_of(s.bn.begin(), s.bn.end(), [](const BnChannel& c) { return c.gamma >= 0; });
}

QuantizedTensor random_weights(const NumberFormat& fmt, int rows, int cols, uint64_t seed) {
  auto t = QuantizedTensor::matrix(static_cast<size_t>(rows), static_cast<size_t>(cols), fmt);
  const auto values = fmt.representable_values();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, values.size() - 1);
  for (auto& v : t.data) v = values[pick(rng)];
  return t;
}

template <typename T>
std::vector<T> slice(const std::vector<T>& v, int offset, int count) {
  if (v.size() == 1) return v;
  return {v.begin() + offset, v.begin() + offset + count};
}

PostOps slice_ops(const PostOps& ops, int offset, int count) {
  PostOps out;
  for (const auto& op : ops) {
    if (const auto* s = std::get_if<ScaleOp>(&op)) {
      out.emplace_back(ScaleOp{slice(s->gamma, offset, count), s->shift});
    } else if (const auto* b = std::get_if<BiasOp>(&op)) {
      out.emplace_back(BiasOp{slice(b->beta, offset, count)});
    } else if (const auto* bn = std::get_if<BatchNormOp>(&op)) {
      out.emplace_back(BatchNormOp{slice(bn->multiplier, offset, count), slice(bn->offset, offset, count), bn->shift});
    } else {
      out.push_back(op);
    }
  }
  return out;
}

HostStage post_ops_stage(PostOps ops, int width) {
  HostStage st;
  st.kind = HostStageKind::PostOps;
  st.ops = std::move(ops);
  st.width = width;
  return st;
}

int64_t words(int64_t elements, int bits) { return (elements * bits + 31) / 32; }

}  // namespace

std::vector<ExecutionPlan> LoweredNetwork::plans() const {
  std::vector<ExecutionPlan> out;
  for (const auto& layer : layers) out.insert(out.end(), layer.tiles.begin(), layer.tiles.end());
  return out;
}

LoweredNetwork lower_network(const NetworkGraph& graph, const LowerOptions& options) {
  LoweredNetwork net;
  net.name = graph.name;
  net.height = graph.height;
  net.width = graph.width;
  net.channels = graph.channels;
  net.input_format = graph.input_format;

  int h = graph.height, w = graph.width, c = graph.channels;
  const auto& specs = graph.layers;
  size_t i = 0;
  while (i < specs.size()) {
    const LayerSpec& spec = specs[i];
    if (!is_mvm(spec.kind)) {
      fail(ErrorCode::ParseError, std::string(to_string(spec.kind)) + " must follow CONV3 or FC");
    }
    std::vector<const LayerSpec*> chain;
    size_t j = i + 1;
    while (j < specs.size() && !is_mvm(specs[j].kind)) chain.push_back(&specs[j++]);
    const bool has_next = j < specs.size();

    LoweredLayer layer = spec.kind == LayerKind::Conv3 ? lower_conv3(spec, h, w, c) : lower_fc(spec, h * w * c);
    layer.index = static_cast<int>(net.layers.size());
    layer.label = "L" + std::to_string(layer.index + 1) + "." + (spec.kind == LayerKind::Conv3 ? "conv3" : "fc");
    for (auto& t : layer.tiles) t.label = layer.label + ".t" + std::to_string(t.tile), t.layer = layer.index;
    if (net.layers.empty() && !(graph.input_format == layer.fmt_x)) {
      fail(ErrorCode::InvalidConfig, "input format " + graph.input_format.to_string() +
                                         " does not match first layer input format " + layer.fmt_x.to_string());
    }
    const int n = layer.inputs();
    const int out_c = layer.out_c;

    // Weights in array row order.
    if (!options.dry_run) {
      if (spec.weights_path.empty()) {
        layer.weights = random_weights(layer.fmt_a, out_c, n, options.seed * 1000003ull + static_cast<uint64_t>(layer.index));
      } else {
        QuantizedTensor file = read_tensor(spec.weights_path);
        const bool conv_shape = spec.kind == LayerKind::Conv3 && file.shape.size() == 4 &&
                                file.shape[0] == static_cast<size_t>(out_c) && file.shape[1] == 3 &&
                                file.shape[2] == 3 && file.shape[3] == static_cast<size_t>(c);
        const bool fc_shape = spec.kind == LayerKind::Fc && file.shape.size() == 2 &&
                              file.shape[0] == static_cast<size_t>(out_c) && file.shape[1] == static_cast<size_t>(n);
        if (!conv_shape && !fc_shape) {
          fail(ErrorCode::ShapeMismatch, "weights '" + spec.weights_path + "' have the wrong shape for " + layer.label);
        }
        layer.weights = QuantizedTensor::matrix(static_cast<size_t>(out_c), static_cast<size_t>(n), layer.fmt_a);
        layer.weights.data = spec.kind == LayerKind::Conv3 ? conv_weights_to_rows(file.data, out_c, c) : file.data;
        layer.weights.validate();
      }
    }

    // Split the post-MVM chain at the first pool; a max pool commutes with a
    // following non-decreasing batch-norm / activation chain.
    std::vector<const LayerSpec*> pre, post;
    {
      size_t k = 0;
      while (k < chain.size() && chain[k]->kind != LayerKind::Pool2) pre.push_back(chain[k++]);
      post.assign(chain.begin() + static_cast<std::ptrdiff_t>(k), chain.end());
      if (!post.empty() && post[0]->pool == PoolKind::Max) {
        const bool hoistable = std::all_of(post.begin() + 1, post.end(), [](const LayerSpec* s) {
          return s->kind == LayerKind::Act || (s->kind == LayerKind::BatchNorm && bn_non_decreasing(*s));
        });
        if (hoistable && post.size() > 1) {
          pre.insert(pre.end(), post.begin() + 1, post.end());
          post.resize(1);
        }
      }
    }
    for (const LayerSpec* s : chain) {
      if (s->kind == LayerKind::BatchNorm && s->bn.size() != 1 && static_cast<int>(s->bn.size()) != out_c) {
        fail(ErrorCode::ShapeMismatch, "batch norm after " + layer.label + " has " + std::to_string(s->bn.size()) +
                                           " channels, expected " + std::to_string(out_c));
      }
    }

    // Comparator path: 1-b XNOR with the chain ending in a sign activation
    // and at most one batch norm before it.
    const bool sign_last = !pre.empty() && pre.back()->kind == LayerKind::Act && pre.back()->act == Activation::Sign;
    const auto bn_count = std::count_if(pre.begin(), pre.end(), [](const LayerSpec* s) { return s->kind == LayerKind::BatchNorm; });
    const bool use_abn = layer.mode == ComputeMode::Xnor && layer.fmt_a.width() == 1 && layer.fmt_x.width() == 1 &&
                         !layer.row_tiled && sign_last && bn_count + 1 == static_cast<long>(pre.size()) &&
                         bn_count <= 1;

    bool binary = false;
    if (use_abn) {
      layer.path = ConversionPath::Abn;
      const BnChannel identity{};
      const int full_scale = layer.tiles.front().full_scale;
      for (int o = 0; o < out_c; ++o) {
        BnChannel ch = identity;
        if (bn_count == 1) ch = pre.front()->bn.size() == 1 ? pre.front()->bn[0] : pre.front()->bn[static_cast<size_t>(o)];
        const auto fold = fold_batchnorm_threshold(ch, 1.0, n, options.fixed_full_scale ? options.fixed_full_scale : full_scale);
        layer.thresholds.push_back(fold.threshold_code);
        if (fold.negate && !layer.weights.data.empty()) {
          for (int k = 0; k < n; ++k) layer.weights.at(static_cast<size_t>(o), static_cast<size_t>(k)) *= -1;
        }
      }
      binary = true;
    } else {
      layer.path = ConversionPath::Adc;
      PostOps ops = fold_chain(pre, out_c);
      if (layer.row_tiled) {
        layer.host_stages.push_back(post_ops_stage(ops, layer.output_width));
      } else {
        layer.datapath_ops = ops;
      }
      binary = sign_last;
    }

    // Host stages after the datapath.
    PostOps host_ops;
    auto flush_host_ops = [&] {
      if (!host_ops.empty()) {
        layer.host_stages.push_back(post_ops_stage(host_ops, layer.output_width));
        host_ops.clear();
      }
    };
    for (const LayerSpec* s : post) {
      if (s->kind == LayerKind::Pool2) {
        flush_host_ops();
        HostStage st;
        st.kind = HostStageKind::Pool;
        st.pool = s->pool;
        layer.host_stages.push_back(st);
        if (s->pool == PoolKind::Avg) binary = false;
        layer.final_h /= 2;
        layer.final_w /= 2;
        if (layer.final_h < 1 || layer.final_w < 1) {
          fail(ErrorCode::ShapeMismatch, "POOL2 after " + layer.label + " on a 1-pixel feature map");
        }
      } else {
        auto folded = fold_chain({s}, out_c);
        host_ops.insert(host_ops.end(), folded.begin(), folded.end());
        if (s->kind == LayerKind::Act) binary = s->act == Activation::Sign;
        else binary = false;
      }
    }
    flush_host_ops();

    NumberFormat next_fmt = NumberFormat::twos(8);
    if (has_next) {
      next_fmt = specs[j].fmt_x();
      const bool in_format = binary && next_fmt.representable(1) && next_fmt.representable(-1);
      if (!in_format) {
        HostStage st;
        st.kind = HostStageKind::Requantize;
        st.format = next_fmt;
        layer.host_stages.push_back(st);
      }
    }

    // Per-tile datapath parameters and host costs.
    for (auto& t : layer.tiles) {
      t.path = layer.path;
      if (layer.path == ConversionPath::Abn) {
        t.output_bits = 1;
        t.abn_thresholds = slice(layer.thresholds, t.output_offset, t.logical_outputs);
      } else if (!layer.datapath_ops.empty()) {
        t.post_ops = slice_ops(layer.datapath_ops, t.output_offset, t.logical_outputs);
      }
      if (options.fixed_full_scale) {
        t.full_scale = options.fixed_full_scale;
        t.lossy = t.full_scale > kAdcMaxCode || t.full_scale < t.rows;
      }
    }
    {
      auto& last = layer.tiles.back();
      const int64_t positions = int64_t{layer.out_h} * layer.out_w;
      const int64_t elements = positions * out_c;
      if (layer.row_tiled) {
        const int64_t extra = static_cast<int64_t>(layer.tiles.size()) - ceil_div(out_c, kColumns / layer.fmt_a.width());
        const int64_t adds = extra * positions * kColumns / layer.fmt_a.width();
        last.host_ops.push_back({HostOp::Kind::PartialSum, 2 * std::min(adds, extra * elements), 3 * std::min(adds, extra * elements)});
      }
      int64_t h_cur = layer.out_h, w_cur = layer.out_w;
      int value_bits = binary && layer.path == ConversionPath::Abn ? 1 : 32;
      for (const auto& st : layer.host_stages) {
        const int64_t e = h_cur * w_cur * out_c;
        if (st.kind == HostStageKind::Pool) {
          const int64_t e_out = (h_cur / 2) * (w_cur / 2) * out_c;
          if (value_bits == 1) {
            last.host_ops.push_back({HostOp::Kind::Pool, 2 * words(e, 1) + words(e_out, 1), words(e, 1) + words(e_out, 1)});
          } else {
            last.host_ops.push_back({HostOp::Kind::Pool, 2 * e + e_out, e + e_out});
          }
          h_cur /= 2;
          w_cur /= 2;
        } else if (st.kind == HostStageKind::PostOps) {
          last.host_ops.push_back({HostOp::Kind::PostOps, e * (1 + 2 * static_cast<int64_t>(st.ops.size())), 2 * e});
          value_bits = 32;
        } else {
          last.host_ops.push_back({HostOp::Kind::Requantize, 3 * e, 2 * e});
        }
      }
    }

    h = layer.final_h;
    w = layer.final_w;
    c = out_c;
    if (spec.kind == LayerKind::Fc) h = w = 1;
    net.layers.push_back(std::move(layer));
    i = j;
  }
  return net;
}

}  // namespace cimu
