/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Functional model of the 2304 x 256 compute-in-memory bit-cell array.
//
// Each cell stores one matrix bit. A column evaluation broadcasts one input
// bit per row, forms the per-cell 1-b product (XNOR or AND) and accumulates
// the products of all broadcasting rows into an integer column sum. Rows that
// are masked or bank-gated leave their capacitor at reset and contribute 0.

#include <bitset>
#include <cstdint>
#include <vector>

#include "cimu/numfmt.hpp"
#include "cimu/tensor.hpp"

namespace cimu {

inline constexpr int kRows = 2304;
inline constexpr int kColumns = 256;
inline constexpr int kSegmentBits = 768;
inline constexpr int kSegmentCount = kRows * kColumns / kSegmentBits;
static_assert(kSegmentBits % kColumns == 0, "segments must cover whole rows");
inline constexpr int kBankGrid = 4;
inline constexpr int kRowQuantum = kRows / kBankGrid;
inline constexpr int kColumnQuantum = kColumns / kBankGrid;

using RowBits = std::bitset<kRows>;
using SegmentPayload = std::bitset<kSegmentBits>;

enum class ComputeMode { Xnor, And };

const char* to_string(ComputeMode mode);
ComputeMode parse_mode(std::string_view text);
/// XNOR pairs with XnorSigned, AND with TwosComplement.
ComputeMode mode_for(const NumberFormat& fmt);

struct BitPlaneVector {
  int plane_index = 0;
  RowBits bits;
  NumberFormat format = NumberFormat::twos(1);
};

struct MaskVector {
  RowBits mask;  // 1 = broadcast
  int zero_tally = 0;

  static MaskVector broadcast_all();
  /// Tally counts suppressed rows among the first `n_conf` rows.
  static MaskVector from_bits(const RowBits& mask, int n_conf);
};

struct ColumnSums {
  std::vector<int> sums;  // one per physical column, 0 for gated columns
  int n_nonmasked = 0;
};

/// Placement of logical outputs on physical columns, most-significant
/// matrix-bit plane first.
struct ColumnMap {
  NumberFormat format = NumberFormat::twos(1);
  std::vector<std::vector<int>> columns;  // [logical output][plane]
  std::vector<int32_t> weights;           // per plane, shared by all outputs

  int logical_outputs() const noexcept { return static_cast<int>(columns.size()); }
  int physical_columns() const noexcept;
};

struct LoadResult {
  ColumnMap map;
  int segments_written = 0;
};

class CimaState {
 public:
  CimaState();

  /// Cells at linear offsets [index*768, index*768 + 768) of the row-major
  /// 2304 x 256 grid take `payload`. Throws SegmentOutOfRange.
  void write_segment(int index, const SegmentPayload& payload);

  bool cell(int row, int column) const;
  const RowBits& column_bits(int column) const { return columns_[static_cast<size_t>(column)]; }

  /// Throws QuantaOutOfRange.
  void gate_banks(int row_quanta, int col_quanta);
  bool bank_enabled(int bank_row, int bank_col) const noexcept;
  int row_quanta() const noexcept { return row_quanta_; }
  int col_quanta() const noexcept { return col_quanta_; }
  int n_conf() const noexcept { return row_quanta_ * kRowQuantum; }
  int m_phys() const noexcept { return col_quanta_ * kColumnQuantum; }
  const RowBits& active_rows() const noexcept { return active_rows_; }

  long long segment_writes() const noexcept { return segment_writes_; }

 private:
  std::vector<RowBits> columns_;
  RowBits active_rows_;
  int row_quanta_ = kBankGrid;
  int col_quanta_ = kBankGrid;
  long long segment_writes_ = 0;
};

/// Places an [M x N] matrix so that output m uses columns m*B .. m*B+B-1.
/// Rows [N, ...) of the touched segments are cleared. Throws CapacityExceeded
/// or UnrepresentableValue.
LoadResult load_matrix(CimaState& state, const QuantizedTensor& matrix);

/// Throws ModeFormatMismatch, or InvariantViolation if the mask tally does not
/// agree with the mask bits over the active rows.
ColumnSums evaluate(const CimaState& state, const BitPlaneVector& x_plane, ComputeMode mode,
                    const MaskVector& mask);

}  // namespace cimu
