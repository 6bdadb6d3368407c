/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/runner.hpp"

#include <algorithm>

#include "cimu/accelerator.hpp"
#include "cimu/error.hpp"

namespace cimu {

std::vector<int32_t> conv_window_column(const FeatureMap& in, int top, int ix) {
  std::vector<int32_t> out(static_cast<size_t>(3 * in.channels), 0);
  if (ix < 0 || ix >= in.width) return out;
  for (int ky = 0; ky < 3; ++ky) {
    const int iy = top + ky;
    if (iy < 0 || iy >= in.height) continue;
    for (int c = 0; c < in.channels; ++c) {
      const size_t src = (static_cast<size_t>(iy) * static_cast<size_t>(in.width) + static_cast<size_t>(ix)) *
                             static_cast<size_t>(in.channels) + static_cast<size_t>(c);
      out[static_cast<size_t>(ky * in.channels + c)] = static_cast<int32_t>(in.values[src]);
    }
  }
  return out;
}

std::vector<int32_t> conv_window(const FeatureMap& in, int oy, int ox, int stride) {
  std::vector<int32_t> out;
  out.reserve(static_cast<size_t>(9 * in.channels));
  for (int kx = 0; kx < 3; ++kx) {
    const auto col = conv_window_column(in, oy * stride - 1, ox * stride + kx - 1);
    out.insert(out.end(), col.begin(), col.end());
  }
  return out;
}

namespace {

QuantizedTensor tile_matrix(const LoweredLayer& layer, const ExecutionPlan& t) {
  auto m = QuantizedTensor::matrix(static_cast<size_t>(t.logical_outputs), static_cast<size_t>(t.rows), layer.fmt_a);
  for (int o = 0; o < t.logical_outputs; ++o) {
    for (int r = 0; r < t.rows; ++r) {
      m.at(static_cast<size_t>(o), static_cast<size_t>(r)) =
          layer.weights.at(static_cast<size_t>(t.output_offset + o), static_cast<size_t>(t.row_offset + r));
    }
  }
  return m;
}

uint64_t tile_seed(uint64_t seed, const ExecutionPlan& t) {
  return seed ^ (0x9E3779B97F4A7C15ull * static_cast<uint64_t>(t.layer * 4096 + t.tile + 1));
}

std::vector<int32_t> slice(const std::vector<int32_t>& v, int offset, int count) {
  return {v.begin() + offset, v.begin() + offset + count};
}

int32_t to_int32(int64_t v) {
  if (v < INT32_MIN || v > INT32_MAX) fail(ErrorCode::InvariantViolation, "feature value exceeds 32 bits");
  return static_cast<int32_t>(v);
}

/// Runs every output position of one tile; writes into `out` (positions x out_c).
void run_tile(const LoweredLayer& layer, const ExecutionPlan& t, const FeatureMap& in,
              const NoiseConfig& noise, std::vector<int64_t>& out, LayerTrace& trace) {
  Accelerator acc;
  acc.load(tile_matrix(layer, t));
  const AdcModel adc{t.full_scale, noise.sigma, tile_seed(noise.seed, t)};
  const size_t out_c = static_cast<size_t>(layer.out_c);

  auto emit = [&](size_t position, const std::vector<int32_t>& values, ReshapingBuffer& buffer) {
    ++trace.mvms;
    if (t.path == ConversionPath::Abn) {
      const auto bits = acc.stream_binary(buffer, values, t.abn_thresholds, t.full_scale, noise.sigma,
                                          tile_seed(noise.seed, t));
      for (size_t m = 0; m < bits.size(); ++m) out[position * out_c + static_cast<size_t>(t.output_offset) + m] = bits[m];
      return;
    }
    const auto y = acc.stream(buffer, values, adc);
    for (size_t m = 0; m < y.size(); ++m) {
      int64_t& slot = out[position * out_c + static_cast<size_t>(t.output_offset) + m];
      if (layer.row_tiled) {
        slot += y[m];
      } else {
        slot = t.post_ops.empty() ? saturate(y[m], layer.output_width)
                                  : apply_post_ops(y[m], t.post_ops, m, layer.output_width).value;
      }
    }
  };

  auto load_full = [&](ReshapingBuffer& buffer, const std::vector<int32_t>& values) {
    buffer.fill_back_bank(pack(input_codes(values, layer.fmt_x), layer.fmt_x.width()));
    buffer.commit_back();
    buffer.swap_banks();
  };

  if (layer.kind == LayerKind::Fc) {
    std::vector<int32_t> x(in.values.size());
    for (size_t k = 0; k < x.size(); ++k) x[k] = to_int32(in.values[k]);
    auto buffer = ReshapingBuffer::fully_connected(layer.fmt_x);
    const auto values = slice(x, t.row_offset, t.rows);
    load_full(buffer, values);
    emit(0, values, buffer);
    return;
  }

  if (layer.stride_reuse) {
    auto buffer = ReshapingBuffer::conv3(layer.fmt_x, layer.in_c);
    for (int oy = 0; oy < layer.out_h; ++oy) {
      auto values = conv_window(in, oy, 0, 1);
      load_full(buffer, values);
      emit(static_cast<size_t>(oy) * static_cast<size_t>(layer.out_w), values, buffer);
      for (int ox = 1; ox < layer.out_w; ++ox) {
        const auto column = conv_window_column(in, oy - 1, ox + 1);
        buffer.stride_shift(input_codes(column, layer.fmt_x));
        buffer.commit_back();
        buffer.swap_banks();
        ++trace.stride_shifts;
        values.erase(values.begin(), values.begin() + 3 * layer.in_c);
        values.insert(values.end(), column.begin(), column.end());
        emit(static_cast<size_t>(oy * layer.out_w + ox), values, buffer);
      }
    }
    return;
  }

  auto buffer = ReshapingBuffer::fully_connected(layer.fmt_x);
  for (int oy = 0; oy < layer.out_h; ++oy) {
    for (int ox = 0; ox < layer.out_w; ++ox) {
      const auto values = slice(conv_window(in, oy, ox, layer.stride), t.row_offset, t.rows);
      load_full(buffer, values);
      emit(static_cast<size_t>(oy * layer.out_w + ox), values, buffer);
    }
  }
}

}  // namespace

FeatureMap apply_host_stages(const LoweredLayer& layer, FeatureMap map) {
  for (const auto& st : layer.host_stages) {
    if (st.kind == HostStageKind::PostOps) {
      for (size_t k = 0; k < map.values.size(); ++k) {
        const size_t channel = k % static_cast<size_t>(map.channels);
        map.values[k] = apply_post_ops(map.values[k], st.ops, channel, st.width).value;
      }
    } else if (st.kind == HostStageKind::Requantize) {
      for (auto& v : map.values) v = requantize(v, st.format);
    } else {
      FeatureMap pooled;
      pooled.height = map.height / 2;
      pooled.width = map.width / 2;
      pooled.channels = map.channels;
      pooled.values.resize(static_cast<size_t>(pooled.height) * static_cast<size_t>(pooled.width) *
                           static_cast<size_t>(pooled.channels));
      auto at = [&](int y, int x, int c) {
        return map.values[(static_cast<size_t>(y) * static_cast<size_t>(map.width) + static_cast<size_t>(x)) *
                              static_cast<size_t>(map.channels) + static_cast<size_t>(c)];
      };
      for (int y = 0; y < pooled.height; ++y) {
        for (int x = 0; x < pooled.width; ++x) {
          for (int c = 0; c < pooled.channels; ++c) {
            const int64_t a = at(2 * y, 2 * x, c), b = at(2 * y, 2 * x + 1, c);
            const int64_t d = at(2 * y + 1, 2 * x, c), e = at(2 * y + 1, 2 * x + 1, c);
            const int64_t v = st.pool == PoolKind::Max ? std::max({a, b, d, e}) : round_half_up_div(a + b + d + e, 4);
            pooled.values[(static_cast<size_t>(y) * static_cast<size_t>(pooled.width) + static_cast<size_t>(x)) *
                              static_cast<size_t>(pooled.channels) + static_cast<size_t>(c)] = v;
          }
        }
      }
      map = std::move(pooled);
    }
  }
  return map;
}

NetworkTrace run_network(const LoweredNetwork& net, const QuantizedTensor& input, const NoiseConfig& noise) {
  const size_t expected = static_cast<size_t>(net.height) * static_cast<size_t>(net.width) * static_cast<size_t>(net.channels);
  if (input.size() != expected) {
    fail(ErrorCode::ShapeMismatch, "network input has " + std::to_string(input.size()) + " elements, expected " +
                                       std::to_string(expected));
  }
  if (!(input.format == net.input_format)) {
    fail(ErrorCode::ShapeMismatch, "network input format " + input.format.to_string() + " vs " +
                                       net.input_format.to_string());
  }
  input.validate_allowing_zero();

  FeatureMap current{net.height, net.width, net.channels, {input.data.begin(), input.data.end()}};
  NetworkTrace trace;
  for (const auto& layer : net.layers) {
    if (layer.weights.data.empty()) fail(ErrorCode::UnloweredPlan, layer.label + " has no weights (dry-run lowering)");
    LayerTrace lt;
    lt.label = layer.label;
    if (layer.kind == LayerKind::Fc) {
      current = FeatureMap{1, 1, static_cast<int>(current.values.size()), std::move(current.values)};
    }
    FeatureMap out{layer.out_h, layer.out_w, layer.out_c, {}};
    out.values.assign(static_cast<size_t>(layer.out_h) * static_cast<size_t>(layer.out_w) * static_cast<size_t>(layer.out_c), 0);
    for (const auto& t : layer.tiles) run_tile(layer, t, current, noise, out.values, lt);
    if (layer.row_tiled) {
      for (auto& v : out.values) v = saturate(v, 32);
    }
    lt.datapath = out;
    lt.output = apply_host_stages(layer, std::move(out));
    current = lt.output;
    trace.layers.push_back(std::move(lt));
  }
  return trace;
}

}  // namespace cimu
