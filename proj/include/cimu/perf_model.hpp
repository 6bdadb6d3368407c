/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Cycle and energy accounting for execution plans.
//
// Cycles: the CIMU pipeline starts a bit-plane evaluation every `initiation
// interval` cycles. Input and output DMA run on separate channels and overlap
// with compute, so one MVM occupies max(B_x * II, C_x, C_y) cycles in steady
// state. Matrix loads are serial and DMA-bound (24 cycles per 768-b segment).
//
// Energy: per-column array and converter energies per bit-plane evaluation,
// per-output datapath energy, per-word reshaping-buffer and DMA energies,
// and per-instruction host energy, taken from the measured two-corner table.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cimu/plan.hpp"

namespace cimu {

struct CycleConstants {
  int rdwr = 20;
  int cima = 50;
  int adc = 20;
  int abn = 20;
  int near_mem = 8;
  int load = 20;
  int dma_cycles_per_word = 1;
  int initiation_interval = 25;

  /// Throws InvalidConfig unless every constant is positive.
  void validate() const;
  /// DMA cycles for one 768-b row segment (C_A).
  int segment_transfer_cycles() const noexcept;
};

enum class Corner { High, Low };

const char* to_string(Corner corner);
/// Throws UnknownCorner.
Corner parse_corner(std::string_view text);

struct CornerEnergy {
  double cpu_per_instr_pj;
  double pdmem_per_32b_pj;
  double dma_per_32b_pj;
  double cima_per_column_pj;
  double adc_per_column_pj;
  double abn_per_column_pj;
  double reshape_per_32b_input_pj;
  double datapath_per_output_pj;
  double f_clk_hz;
};

class EnergyTable {
 public:
  /// 1.2 V and 0.7/0.85 V measurement corners.
  static EnergyTable measured();
  const CornerEnergy& at(Corner corner) const noexcept;

 private:
  CornerEnergy high_{};
  CornerEnergy low_{};
};

/// Share of the per-column array energy spent on input broadcast and the
/// bit-cell multiply; masked rows avoid it.
inline constexpr double kBroadcastShare = 0.5;

struct CycleReport {
  int64_t matrix_load = 0;
  int64_t mvm_steady = 0;
  int64_t pipeline_fill = 0;
  int64_t host = 0;
  int64_t total = 0;

  // Busy counters, overlapped inside mvm_steady.
  int64_t compute = 0;
  int64_t input_dma = 0;
  int64_t output_dma = 0;
  bool transfer_bound = false;

  std::vector<std::pair<std::string, std::string>> key_values() const;
};

struct EnergyReport {
  double cima_pj = 0;
  double conversion_pj = 0;
  double datapath_pj = 0;
  double reshape_pj = 0;
  double dma_input_pj = 0;
  double dma_output_pj = 0;
  double dma_matrix_pj = 0;
  double host_pj = 0;
  double total_pj = 0;

  double core_pj() const noexcept { return cima_pj + conversion_pj; }
  std::vector<std::pair<std::string, std::string>> key_values() const;
};

struct PerfSummary {
  Corner corner = Corner::High;
  CycleReport cycles;
  EnergyReport energy;
  double ops = 0;              // 1-b operations (2 per 1-b multiply-accumulate)
  double seconds = 0;
  double peak_tops = 0;        // compute-bound 1b-TOPS
  double effective_tops = 0;   // including transfers, loads and host work
  double core_tops_per_w = 0;  // array + converters only
  double system_tops_per_w = 0;

  std::vector<std::pair<std::string, std::string>> key_values() const;
};

class PerfModel {
 public:
  PerfModel() = default;
  PerfModel(CycleConstants cycles, EnergyTable table);

  const CycleConstants& constants() const noexcept { return cycles_; }
  const EnergyTable& table() const noexcept { return table_; }

  int64_t matrix_load_cycles(int segments = kSegmentCount) const;
  int vector_transfer_cycles(int n, int bx) const;
  int output_transfer_cycles(int m_logical, int by) const;

  /// Throws UnloweredPlan.
  CycleReport mvm_cycles(const ExecutionPlan& plan) const;
  EnergyReport mvm_energy(const ExecutionPlan& plan, Corner corner) const;

  double plan_ops(const ExecutionPlan& plan) const;
  PerfSummary summarize(std::span<const ExecutionPlan> plans, Corner corner) const;

 private:
  CycleConstants cycles_{};
  EnergyTable table_ = EnergyTable::measured();
};

/// The full-array 1-b XNOR/ABN configuration used for peak figures.
ExecutionPlan full_array_binary_plan(int64_t mvm_count = 1);

}  // namespace cimu
