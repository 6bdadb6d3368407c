/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/accelerator.hpp"

#include <algorithm>
#include <string>

#include "cimu/error.hpp"

namespace cimu {

std::vector<uint8_t> input_codes(std::span<const int32_t> values, const NumberFormat& fmt) {
  std::vector<uint8_t> codes(values.size());
  // 1-b XNOR has no zero code
  const bool no_zero = fmt.kind() == FormatKind::XnorSigned && fmt.width() == 1;
  for (size_t n = 0; n < values.size(); ++n) {
    codes[n] = (no_zero && values[n] == 0) ? uint8_t{0} : encode_code(values[n], fmt);
  }
  return codes;
}

LoadResult Accelerator::load(const QuantizedTensor& matrix) {
  auto result = load_matrix(array_, matrix);
  inputs_ = static_cast<int>(matrix.cols());
  map_ = result.map;
  const int row_quanta = std::max(1, (inputs_ + kRowQuantum - 1) / kRowQuantum);
  const int col_quanta =
      std::max(1, (map_.physical_columns() + kColumnQuantum - 1) / kColumnQuantum);
  array_.gate_banks(row_quanta, col_quanta);
  return result;
}

void Accelerator::check_vector(std::span<const int32_t> values, const NumberFormat& fmt_x) const {
  if (static_cast<int>(values.size()) != inputs_) {
    fail(ErrorCode::ShapeMismatch, "input vector has " + std::to_string(values.size()) +
                                       " elements, resident matrix expects " +
                                       std::to_string(inputs_));
  }
  if (mode_for(fmt_x) != mode_for(map_.format)) {
    fail(ErrorCode::ModeFormatMismatch,
         "input format " + fmt_x.to_string() + " vs matrix format " + map_.format.to_string());
  }
}

std::vector<int64_t> Accelerator::run(std::span<const int32_t> x, const NumberFormat& fmt_x,
                                      const AdcModel& adc) {
  check_vector(x, fmt_x);
  auto buffer = ReshapingBuffer::fully_connected(fmt_x);
  buffer.fill_back_bank(pack(input_codes(x, fmt_x), fmt_x.width()));
  buffer.commit_back();
  buffer.swap_banks();
  return stream(buffer, x, adc);
}

std::vector<int64_t> Accelerator::stream(ReshapingBuffer& buffer, std::span<const int32_t> values,
                                         const AdcModel& adc) {
  const NumberFormat& fmt_x = buffer.format();
  check_vector(values, fmt_x);
  adc.validate();
  const ComputeMode mode = mode_for(fmt_x);
  const MaskVector mask = derive_sparsity(values, mode, array_.n_conf());

  const int bx = fmt_x.width();
  const auto outputs = static_cast<size_t>(map_.logical_outputs());
  // codes[m][i][j]
  std::vector<std::vector<std::vector<int>>> codes(
      outputs, std::vector<std::vector<int>>(static_cast<size_t>(bx)));
  std::vector<int> n_nonmasked(static_cast<size_t>(bx));

  buffer.begin_stream();
  for (int i = 0; i < bx; ++i) {
    const BitPlaneVector plane = buffer.read_plane(i);
    const ColumnSums sums = evaluate(array_, plane, mode, mask);
    n_nonmasked[static_cast<size_t>(i)] = sums.n_nonmasked;
    for (size_t m = 0; m < outputs; ++m) {
      for (const int column : map_.columns[m]) {
        const NoiseKey key{static_cast<uint64_t>(column), invocation_};
        codes[m][static_cast<size_t>(i)].push_back(
            adc_quantize(sums.sums[static_cast<size_t>(column)], adc, key));
      }
    }
    ++invocation_;
    ++plane_evaluations_;
  }
  buffer.end_stream();
  last_n_nonmasked_ = n_nonmasked.front();

  const auto ctx = RecombineContext::make(map_.format, fmt_x, mode, std::move(n_nonmasked));
  std::vector<int64_t> y(outputs);
  for (size_t m = 0; m < outputs; ++m) y[m] = recombine(codes[m], ctx, adc);
  return y;
}

std::vector<int32_t> Accelerator::stream_binary(ReshapingBuffer& buffer,
                                                std::span<const int32_t> values,
                                                std::span<const int> thresholds, int full_scale,
                                                double noise_sigma, uint64_t seed) {
  const NumberFormat& fmt_x = buffer.format();
  check_vector(values, fmt_x);
  if (fmt_x.width() != 1 || map_.format.width() != 1) {
    fail(ErrorCode::PlaneCountMismatch, "comparator path needs 1-b matrix and input elements");
  }
  const auto outputs = static_cast<size_t>(map_.logical_outputs());
  if (thresholds.size() != outputs) {
    fail(ErrorCode::ShapeMismatch, "need one threshold code per output");
  }
  const ComputeMode mode = mode_for(fmt_x);
  const MaskVector mask = derive_sparsity(values, mode, array_.n_conf());

  buffer.begin_stream();
  const ColumnSums sums = evaluate(array_, buffer.read_plane(0), mode, mask);
  buffer.end_stream();
  last_n_nonmasked_ = sums.n_nonmasked;

  std::vector<int32_t> out(outputs);
  for (size_t m = 0; m < outputs; ++m) {
    const int column = map_.columns[m].front();
    AbnModel abn{full_scale, thresholds[m], noise_sigma, seed};
    abn.validate();
    const NoiseKey key{static_cast<uint64_t>(column), invocation_};
    out[m] = abn_binarize(sums.sums[static_cast<size_t>(column)], abn, key) ? 1 : -1;
  }
  ++invocation_;
  ++plane_evaluations_;
  return out;
}

}  // namespace cimu
