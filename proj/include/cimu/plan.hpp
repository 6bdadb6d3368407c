/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cimu/cima_array.hpp"
#include "cimu/near_mem.hpp"
#include "cimu/numfmt.hpp"

namespace cimu {

enum class ConversionPath { Adc, Abn };

const char* to_string(ConversionPath path);

/// Work done by the host CPU between array passes (pooling, partial-sum
/// accumulation, post-ops on accumulated sums). Costed by instruction and
/// memory-access counts only.
struct HostOp {
  enum class Kind { Pool, PartialSum, PostOps, Requantize };
  Kind kind = Kind::Pool;
  int64_t instructions = 0;
  int64_t memory_accesses = 0;
};

/// One matrix tile resident in the array, plus everything needed to stream
/// inputs through it and cost the result.
struct ExecutionPlan {
  bool lowered = false;
  std::string label;
  int layer = 0;
  int tile = 0;

  NumberFormat fmt_a = NumberFormat::twos(1);
  NumberFormat fmt_x = NumberFormat::twos(1);
  ComputeMode mode = ComputeMode::And;
  ConversionPath path = ConversionPath::Adc;

  // Tile coordinates in the layer's [outputs x inputs] matrix.
  int row_offset = 0;
  int rows = 0;
  int output_offset = 0;
  int logical_outputs = 0;

  int row_quanta = kBankGrid;
  int col_quanta = kBankGrid;

  int full_scale = 0;
  int guaranteed_zeros = 0;
  bool lossy = false;

  int segments = 0;           // 768-b writes to load the tile
  int64_t mvm_count = 0;      // input vectors streamed through the tile
  int64_t reload_mvms = 0;    // of which loaded with a full input vector
  int reload_words = 0;       // 32-b words per full input vector
  int reuse_words = 0;        // 32-b words per stride-reuse vector
  int output_bits = 16;       // per logical output word sent back
  double zero_fraction = 0.0; // expected suppressed share of active rows

  PostOps post_ops;                 // ADC path
  std::vector<int> abn_thresholds;  // ABN path, per logical output
  std::vector<HostOp> host_ops;

  bool row_tiled = false;
  bool col_tiled = false;
  std::vector<std::string> notes;

  int n_conf() const noexcept { return row_quanta * kRowQuantum; }
  int m_phys() const noexcept { return col_quanta * kColumnQuantum; }
  int physical_columns() const noexcept { return logical_outputs * fmt_a.width(); }
  int output_words() const noexcept;
};

}  // namespace cimu
