/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/verify_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "cimu/accelerator.hpp"
#include "cimu/converters.hpp"
#include "cimu/error.hpp"

namespace cimu {

std::vector<int64_t> reference_mvm(const QuantizedTensor& a, const QuantizedTensor& x) {
  if (a.shape.size() != 2) fail(ErrorCode::ShapeMismatch, "matrix must be 2-D");
  if (x.size() != a.cols()) {
    fail(ErrorCode::ShapeMismatch, "matrix has " + std::to_string(a.cols()) + " columns, vector has " +
                                       std::to_string(x.size()) + " elements");
  }
  std::vector<int64_t> y(a.rows(), 0);
  for (size_t m = 0; m < a.rows(); ++m) {
    for (size_t n = 0; n < a.cols(); ++n) y[m] += int64_t{a.at(m, n)} * x.data[n];
  }
  return y;
}

// ---------------------------------------------------------------------------
// Reference network

namespace {

int64_t ref_round_shift(int64_t v, int shift) {
  if (shift == 0) return v;
  const int64_t unit = int64_t{1} << shift;
  // floor((v + unit/2) / unit)
  const int64_t num = v + unit / 2;
  return num >= 0 ? num / unit : -((-num + unit - 1) / unit);
}

int64_t ref_clamp(int64_t v, int width) {
  const int64_t hi = (int64_t{1} << (width - 1)) - 1;
  return v > hi ? hi : (v < -hi - 1 ? -hi - 1 : v);
}

template <typename T>
T per_channel(const std::vector<T>& v, size_t c) {
  return v.size() == 1 ? v[0] : v[c];
}

int64_t ref_post_ops(int64_t v, const PostOps& ops, size_t c, int width) {
  for (const auto& op : ops) {
    if (const auto* s = std::get_if<ScaleOp>(&op)) {
      v = ref_round_shift(v * per_channel(s->gamma, c), s->shift);
    } else if (const auto* b = std::get_if<BiasOp>(&op)) {
      v = v + per_channel(b->beta, c);
    } else if (const auto* bn = std::get_if<BatchNormOp>(&op)) {
      v = ref_round_shift(v * per_channel(bn->multiplier, c) + per_channel(bn->offset, c), bn->shift);
    } else if (const auto& act = std::get<ActivationOp>(op); act.fn == Activation::Relu) {
      v = v < 0 ? 0 : v;
    } else if (act.fn == Activation::Sign) {
      v = v < 0 ? -1 : 1;
    }
  }
  return ref_clamp(v, width);
}

int64_t ref_requantize(int64_t v, const NumberFormat& fmt) {
  const int64_t lo = fmt.min_value(), hi = fmt.max_value();
  if (fmt.kind() == FormatKind::TwosComplement) return std::min(std::max(v, lo), hi);
  if (fmt.width() == 1) return v == 0 ? 0 : (v > 0 ? 1 : -1);
  v = std::min(std::max(v, lo), hi);
  if (v % 2 == 0) return v;
  return v + 1;  // odd values round up to the next even value
}

struct Map {
  int h = 1, w = 1, c = 0;
  std::vector<int64_t> v;
  int64_t get(int y, int x, int ch) const {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0;
    return v[static_cast<size_t>((y * w + x) * c + ch)];
  }
};

Map ref_layer(const LoweredLayer& L, const Map& in) {
  Map out{L.out_h, L.out_w, L.out_c, {}};
  out.v.assign(static_cast<size_t>(L.out_h * L.out_w * L.out_c), 0);
  const bool abn = L.path == ConversionPath::Abn;
  const int full_scale = L.tiles.front().full_scale;

  for (int oy = 0; oy < L.out_h; ++oy) {
    for (int ox = 0; ox < L.out_w; ++ox) {
      for (int o = 0; o < L.out_c; ++o) {
        int64_t y = 0;
        int64_t nonzero = 0;
        if (L.kind == LayerKind::Fc) {
          for (int n = 0; n < L.inputs(); ++n) {
            const int64_t xv = in.v[static_cast<size_t>(n)];
            y += xv * L.weights.at(static_cast<size_t>(o), static_cast<size_t>(n));
            nonzero += xv != 0;
          }
        } else {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              for (int ch = 0; ch < L.in_c; ++ch) {
                const int64_t xv = in.get(oy * L.stride + ky - 1, ox * L.stride + kx - 1, ch);
                const auto row = static_cast<size_t>(kx * 3 * L.in_c + ky * L.in_c + ch);
                y += xv * L.weights.at(static_cast<size_t>(o), row);
                nonzero += xv != 0;
              }
            }
          }
        }
        int64_t result;
        if (abn) {
          const int64_t agree = (y + nonzero) / 2;
          result = 63 * agree >= int64_t{L.thresholds[static_cast<size_t>(o)]} * full_scale ? 1 : -1;
        } else if (L.row_tiled) {
          result = ref_clamp(y, 32);
        } else {
          result = ref_post_ops(y, L.datapath_ops, static_cast<size_t>(o), L.output_width);
        }
        out.v[static_cast<size_t>((oy * L.out_w + ox) * L.out_c + o)] = result;
      }
    }
  }

  for (const auto& st : L.host_stages) {
    if (st.kind == HostStageKind::PostOps) {
      for (size_t k = 0; k < out.v.size(); ++k) {
        out.v[k] = ref_post_ops(out.v[k], st.ops, k % static_cast<size_t>(out.c), st.width);
      }
    } else if (st.kind == HostStageKind::Requantize) {
      for (auto& v : out.v) v = ref_requantize(v, st.format);
    } else {
      Map p{out.h / 2, out.w / 2, out.c, {}};
      for (int y = 0; y < p.h; ++y) {
        for (int x = 0; x < p.w; ++x) {
          for (int ch = 0; ch < p.c; ++ch) {
            const int64_t q[4] = {out.get(2 * y, 2 * x, ch), out.get(2 * y, 2 * x + 1, ch),
                                  out.get(2 * y + 1, 2 * x, ch), out.get(2 * y + 1, 2 * x + 1, ch)};
            if (st.pool == PoolKind::Max) {
              p.v.push_back(*std::max_element(q, q + 4));
            } else {
              const int64_t sum = q[0] + q[1] + q[2] + q[3];
              p.v.push_back(static_cast<int64_t>(std::floor(static_cast<double>(sum) / 4.0 + 0.5)));
            }
          }
        }
      }
      out = std::move(p);
    }
  }
  return out;
}

}  // namespace

FeatureMap reference_network(const LoweredNetwork& net, const QuantizedTensor& input) {
  Map cur{net.height, net.width, net.channels, {input.data.begin(), input.data.end()}};
  if (cur.v.size() != static_cast<size_t>(net.height * net.width * net.channels)) {
    fail(ErrorCode::ShapeMismatch, "network input size");
  }
  for (const auto& layer : net.layers) {
    if (layer.kind == LayerKind::Fc) cur = Map{1, 1, static_cast<int>(cur.v.size()), std::move(cur.v)};
    cur = ref_layer(layer, cur);
  }
  return FeatureMap{cur.h, cur.w, cur.c, std::move(cur.v)};
}

// ---------------------------------------------------------------------------
// SQNR

double SqnrResult::db() const {
  if (exact()) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / error);
}

std::string SqnrResult::text() const { return exact() ? "exact" : fmt::format("{:.3f}", db()); }

namespace {

std::mt19937_64 trial_rng(uint64_t seed, uint64_t trial) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(trial), static_cast<uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

std::vector<int32_t> nonzero_values(const NumberFormat& fmt) {
  auto v = fmt.representable_values();
  v.erase(std::remove(v.begin(), v.end(), 0), v.end());
  return v;
}

}  // namespace

SqnrResult measure_sqnr(const SqnrConfig& cfg) {
  if (cfg.trials < 1) fail(ErrorCode::InvalidConfig, "trials must be >= 1");
  if (cfg.n < 1 || cfg.n > kRows) fail(ErrorCode::InvalidConfig, "N must be in 1..2304");
  if (cfg.sparsity < 0.0 || cfg.sparsity > 1.0) fail(ErrorCode::InvalidConfig, "sparsity must be in [0, 1]");
  const NumberFormat fa = cfg.mode == ComputeMode::Xnor ? NumberFormat::xnor(cfg.ba) : NumberFormat::twos(cfg.ba);
  const NumberFormat fx = cfg.mode == ComputeMode::Xnor ? NumberFormat::xnor(cfg.bx) : NumberFormat::twos(cfg.bx);
  const int outputs = std::clamp(cfg.outputs, 1, kColumns / cfg.ba);
  const auto a_values = fa.representable_values();
  const auto x_values = fx.representable_values();
  const auto x_nonzero = nonzero_values(fx);

  const int nonzero = cfg.sparsity > 0.0 ? static_cast<int>(std::floor((1.0 - cfg.sparsity) * cfg.n)) : cfg.n;
  SqnrResult result;
  result.full_scale = cfg.full_scale > 0 ? cfg.full_scale : choose_full_scale(cfg.n, cfg.n - nonzero).full_scale;
  const AdcModel adc{result.full_scale, cfg.noise_sigma, cfg.seed};

  for (int trial = 0; trial < cfg.trials; ++trial) {
    auto rng = trial_rng(cfg.seed, static_cast<uint64_t>(trial));
    auto a = QuantizedTensor::matrix(static_cast<size_t>(outputs), static_cast<size_t>(cfg.n), fa);
    std::uniform_int_distribution<size_t> pick_a(0, a_values.size() - 1);
    for (auto& v : a.data) v = a_values[pick_a(rng)];

    auto x = QuantizedTensor::vector(std::vector<int32_t>(static_cast<size_t>(cfg.n), 0), fx);
    if (cfg.sparsity > 0.0) {
      std::vector<int> order(static_cast<size_t>(cfg.n));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::uniform_int_distribution<size_t> pick_x(0, x_nonzero.size() - 1);
      for (int k = 0; k < nonzero; ++k) x.data[static_cast<size_t>(order[static_cast<size_t>(k)])] = x_nonzero[pick_x(rng)];
    } else {
      std::uniform_int_distribution<size_t> pick_x(0, x_values.size() - 1);
      for (auto& v : x.data) v = x_values[pick_x(rng)];
    }

    Accelerator acc;
    acc.load(a);
    const auto y_sim = acc.run(x.data, fx, adc);
    const auto y_ref = reference_mvm(a, x);
    for (size_t m = 0; m < y_ref.size(); ++m) {
      const double r = static_cast<double>(y_ref[m]);
      const double e = r - static_cast<double>(y_sim[m]);
      result.signal += r * r;
      result.error += e * e;
    }
    result.samples += static_cast<int64_t>(y_ref.size());
  }
  return result;
}

std::string SqnrCurve::csv() const {
  std::string out;
  out += fmt::format("# sqnr_db pooled over outputs and trials\n");
  out += fmt::format("# n={} mode={} sparsity={} trials={} outputs={} seed={} full_scale={} noise_sigma={}\n", config.n,
                     to_string(config.mode), config.sparsity, config.trials, config.outputs, config.seed,
                     config.full_scale > 0 ? std::to_string(config.full_scale) : std::string("auto"), config.noise_sigma);
  out += "bx";
  for (const int ba : ba_axis) out += fmt::format(",ba={}", ba);
  out += "\n";
  for (size_t i = 0; i < bx_values.size(); ++i) {
    out += std::to_string(bx_values[i]);
    for (const auto& cell : series[i]) out += "," + cell.text();
    out += "\n";
  }
  return out;
}

SqnrCurve sqnr_sweep(const SqnrConfig& base, const std::vector<int>& ba_axis, const std::vector<int>& bx_values) {
  SqnrCurve curve;
  curve.config = base;
  curve.ba_axis = ba_axis;
  curve.bx_values = bx_values;
  for (const int bx : bx_values) {
    std::vector<SqnrResult> row;
    for (const int ba : ba_axis) {
      SqnrConfig cfg = base;
      cfg.ba = ba;
      cfg.bx = bx;
      row.push_back(measure_sqnr(cfg));
    }
    curve.series.push_back(std::move(row));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Linearity

std::string LinearityTable::csv() const {
  std::string out = fmt::format("# path={} n={} full_scale={} noise_sigma={} seed={}\n", to_string(config.path),
                                config.n, config.full_scale, config.noise_sigma, config.seed);
  out += config.path == ConversionPath::Adc ? "# value=adc code\n" : "# value=first threshold code with output 0\n";
  out += "k,mean,sigma";
  for (int c = 0; c < config.columns; ++c) out += fmt::format(",col{}", c);
  out += "\n";
  for (const auto& row : rows) {
    out += fmt::format("{},{:.6f},{:.6f}", row.k, row.mean, row.sigma);
    for (const int v : row.per_column) out += fmt::format(",{}", v);
    out += "\n";
  }
  return out;
}

LinearityTable linearity_sweep(const LinearityConfig& cfg) {
  if (cfg.n < 1 || cfg.n > kRows) fail(ErrorCode::InvalidConfig, "N must be in 1..2304");
  if (cfg.columns < 1 || cfg.columns > kColumns) fail(ErrorCode::InvalidConfig, "columns must be in 1..256");
  LinearityTable table;
  table.config = cfg;

  // All-ones cells: value -1 in 1-b two's complement, AND mode.
  const NumberFormat fmt1 = NumberFormat::twos(1);
  CimaState array;
  auto ones = QuantizedTensor::matrix(static_cast<size_t>(cfg.columns), static_cast<size_t>(cfg.n), fmt1);
  std::fill(ones.data.begin(), ones.data.end(), -1);
  load_matrix(array, ones);
  array.gate_banks((cfg.n + kRowQuantum - 1) / kRowQuantum, (cfg.columns + kColumnQuantum - 1) / kColumnQuantum);

  const AdcModel adc{cfg.full_scale, cfg.noise_sigma, cfg.seed};
  const AbnModel probe{cfg.full_scale, 0, cfg.noise_sigma, cfg.seed};
  if (cfg.path == ConversionPath::Adc) adc.validate(); else probe.validate();

  for (int k = 0; k <= cfg.n; ++k) {
    BitPlaneVector plane;
    plane.format = fmt1;
    for (int r = 0; r < k; ++r) plane.bits.set(static_cast<size_t>(r));
    const ColumnSums sums = evaluate(array, plane, ComputeMode::And, MaskVector::broadcast_all());
    LinearityRow row;
    row.k = k;
    for (int c = 0; c < cfg.columns; ++c) {
      const NoiseKey key{static_cast<uint64_t>(c), static_cast<uint64_t>(k)};
      const int s = sums.sums[static_cast<size_t>(c)];
      if (cfg.path == ConversionPath::Adc) {
        row.per_column.push_back(adc_quantize(s, adc, key));
      } else {
        int t = 0;
        for (; t <= kDacMaxCode; ++t) {
          AbnModel abn = probe;
          abn.threshold_code = t;
          if (!abn_binarize(s, abn, key)) break;
        }
        row.per_column.push_back(t);
      }
    }
    const double n = static_cast<double>(row.per_column.size());
    double sum = 0, sq = 0;
    for (const int v : row.per_column) sum += v;
    row.mean = sum / n;
    for (const int v : row.per_column) sq += (v - row.mean) * (v - row.mean);
    row.sigma = std::sqrt(sq / n);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace cimu
