/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/cima_array.hpp"

#include <array>
#include <string>

#include "cimu/error.hpp"

namespace cimu {

const char* to_string(ComputeMode mode) { return mode == ComputeMode::Xnor ? "xnor" : "and"; }

ComputeMode parse_mode(std::string_view text) {
  if (text == "xnor") return ComputeMode::Xnor;
  if (text == "and") return ComputeMode::And;
  fail(ErrorCode::ParseError, "unknown compute mode '" + std::string(text) + "'");
}

ComputeMode mode_for(const NumberFormat& fmt) {
  return fmt.kind() == FormatKind::XnorSigned ? ComputeMode::Xnor : ComputeMode::And;
}

MaskVector MaskVector::broadcast_all() {
  MaskVector m;
  m.mask.set();
  return m;
}

MaskVector MaskVector::from_bits(const RowBits& mask, int n_conf) {
  MaskVector m;
  m.mask = mask;
  int suppressed = 0;
  for (int n = 0; n < n_conf; ++n) suppressed += mask[static_cast<size_t>(n)] ? 0 : 1;
  m.zero_tally = suppressed;
  return m;
}

int ColumnMap::physical_columns() const noexcept {
  int total = 0;
  for (const auto& group : columns) total += static_cast<int>(group.size());
  return total;
}

CimaState::CimaState() : columns_(kColumns) { active_rows_.set(); }

void CimaState::write_segment(int index, const SegmentPayload& payload) {
  if (index < 0 || index >= kSegmentCount) {
    fail(ErrorCode::SegmentOutOfRange, "segment index " + std::to_string(index) +
                                           " outside [0, " + std::to_string(kSegmentCount) + ")");
  }
  // a segment is exactly kSegmentBits / kColumns whole rows
  constexpr size_t rows_per_segment = kSegmentBits / kColumns;
  const size_t first_row = static_cast<size_t>(index) * rows_per_segment;
  for (size_t r = 0; r < rows_per_segment; ++r) {
    for (size_t c = 0; c < kColumns; ++c) columns_[c][first_row + r] = payload[r * kColumns + c];
  }
  ++segment_writes_;
}

bool CimaState::cell(int row, int column) const {
  return columns_.at(static_cast<size_t>(column)).test(static_cast<size_t>(row));
}

void CimaState::gate_banks(int row_quanta, int col_quanta) {
  if (row_quanta < 1 || row_quanta > kBankGrid || col_quanta < 1 || col_quanta > kBankGrid) {
    fail(ErrorCode::QuantaOutOfRange, "bank quanta (" + std::to_string(row_quanta) + ", " +
                                          std::to_string(col_quanta) + ") outside 1..4");
  }
  row_quanta_ = row_quanta;
  col_quanta_ = col_quanta;
  active_rows_.reset();
  for (int n = 0; n < n_conf(); ++n) active_rows_.set(static_cast<size_t>(n));
}

bool CimaState::bank_enabled(int bank_row, int bank_col) const noexcept {
  return bank_row >= 0 && bank_col >= 0 && bank_row < row_quanta_ && bank_col < col_quanta_;
}

LoadResult load_matrix(CimaState& state, const QuantizedTensor& matrix) {
  if (matrix.shape.size() != 2) {
    fail(ErrorCode::ShapeMismatch, "matrix must be two-dimensional");
  }
  const auto& fmt = matrix.format;
  const int width = fmt.width();
  const int outputs = static_cast<int>(matrix.rows());
  const int inputs = static_cast<int>(matrix.cols());
  if (outputs * width > kColumns) {
    fail(ErrorCode::CapacityExceeded,
         std::to_string(outputs) + " outputs x " + std::to_string(width) +
             " bits need more than " + std::to_string(kColumns) + " columns");
  }
  if (inputs > kRows) {
    fail(ErrorCode::CapacityExceeded,
         "input dimensionality " + std::to_string(inputs) + " exceeds " + std::to_string(kRows));
  }
  matrix.validate();

  // value -> raw code, indexed by value + 128
  std::array<int16_t, 257> codes{};
  for (const int32_t v : fmt.representable_values()) {
    codes[static_cast<size_t>(v + 128)] = encode_code(v, fmt);
  }

  LoadResult result;
  result.map.format = fmt;
  result.map.weights = bit_weights(fmt);
  result.map.columns.resize(static_cast<size_t>(outputs));
  for (int m = 0; m < outputs; ++m) {
    for (int k = 0; k < width; ++k) result.map.columns[static_cast<size_t>(m)].push_back(m * width + k);
  }

  constexpr int rows_per_segment = kSegmentBits / kColumns;
  const int segments = (inputs + rows_per_segment - 1) / rows_per_segment;
  for (int seg = 0; seg < segments; ++seg) {
    SegmentPayload payload;
    for (int r = 0; r < rows_per_segment; ++r) {
      const int n = seg * rows_per_segment + r;
      if (n >= inputs) break;
      for (int m = 0; m < outputs; ++m) {
        const int code = codes[static_cast<size_t>(matrix.at(static_cast<size_t>(m), static_cast<size_t>(n)) + 128)];
        for (int k = 0; k < width; ++k) {
          if ((code >> (width - 1 - k)) & 1) {
            payload.set(static_cast<size_t>(r * kColumns + m * width + k));
          }
        }
      }
    }
    state.write_segment(seg, payload);
  }
  result.segments_written = segments;
  return result;
}

ColumnSums evaluate(const CimaState& state, const BitPlaneVector& x_plane, ComputeMode mode,
                    const MaskVector& mask) {
  if (mode != mode_for(x_plane.format)) {
    fail(ErrorCode::ModeFormatMismatch, std::string(to_string(mode)) +
                                            " evaluation with input format " +
                                            x_plane.format.to_string());
  }
  const RowBits broadcasting = mask.mask & state.active_rows();
  ColumnSums out;
  out.n_nonmasked = static_cast<int>(broadcasting.count());
  if (state.n_conf() - out.n_nonmasked != mask.zero_tally) {
    fail(ErrorCode::InvariantViolation,
         "zero tally " + std::to_string(mask.zero_tally) + " disagrees with mask (" +
             std::to_string(state.n_conf() - out.n_nonmasked) + " suppressed rows)");
  }
  out.sums.assign(kColumns, 0);
  const RowBits driven = x_plane.bits & broadcasting;
  for (int c = 0; c < state.m_phys(); ++c) {
    const RowBits& a = state.column_bits(c);
    const RowBits products = mode == ComputeMode::And ? (a & driven) : (~(a ^ x_plane.bits) & broadcasting);
    out.sums[static_cast<size_t>(c)] = static_cast<int>(products.count());
  }
  return out;
}

}  // namespace cimu
