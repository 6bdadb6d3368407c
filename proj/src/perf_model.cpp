/* SPDX-License-Identifier: Apache-2.0 */
#include "cimu/perf_model.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "cimu/error.hpp"
#include "cimu/io_frontend.hpp"

namespace cimu {

const char* to_string(ConversionPath path) { return path == ConversionPath::Adc ? "adc" : "abn"; }

int ExecutionPlan::output_words() const noexcept {
  return (logical_outputs * output_bits + 31) / 32;
}

void CycleConstants::validate() const {
  for (const int v : {rdwr, cima, adc, abn, near_mem, load, dma_cycles_per_word, initiation_interval}) {
    if (v <= 0) fail(ErrorCode::InvalidConfig, "cycle constants must be positive");
  }
}

int CycleConstants::segment_transfer_cycles() const noexcept {
  return kSegmentBits / 32 * dma_cycles_per_word;
}

const char* to_string(Corner corner) { return corner == Corner::High ? "high" : "low"; }

Corner parse_corner(std::string_view text) {
  if (text == "high") return Corner::High;
  if (text == "low") return Corner::Low;
  fail(ErrorCode::UnknownCorner, "unknown corner '" + std::string(text) + "' (high|low)");
}

EnergyTable EnergyTable::measured() {
  EnergyTable t;
  t.high_ = {52.0, 96.0, 13.5, 20.4, 3.56, 9.78, 35.0, 14.7, 100e6};
  t.low_ = {26.0, 33.0, 7.0, 9.7, 1.79, 4.92, 12.0, 8.3, 40e6};
  return t;
}

const CornerEnergy& EnergyTable::at(Corner corner) const noexcept {
  return corner == Corner::High ? high_ : low_;
}

namespace {

std::string num(double v) { return fmt::format("{:.6g}", v); }
std::string num(int64_t v) { return fmt::format("{}", v); }

}  // namespace

std::vector<std::pair<std::string, std::string>> CycleReport::key_values() const {
  return {{"cycles.matrix_load", num(matrix_load)},
          {"cycles.mvm_steady", num(mvm_steady)},
          {"cycles.pipeline_fill", num(pipeline_fill)},
          {"cycles.host", num(host)},
          {"cycles.total", num(total)},
          {"cycles.busy.compute", num(compute)},
          {"cycles.busy.input_dma", num(input_dma)},
          {"cycles.busy.output_dma", num(output_dma)},
          {"cycles.transfer_bound", transfer_bound ? "true" : "false"}};
}

std::vector<std::pair<std::string, std::string>> EnergyReport::key_values() const {
  return {{"energy_pj.cima", num(cima_pj)},
          {"energy_pj.conversion", num(conversion_pj)},
          {"energy_pj.datapath", num(datapath_pj)},
          {"energy_pj.reshape", num(reshape_pj)},
          {"energy_pj.dma_input", num(dma_input_pj)},
          {"energy_pj.dma_output", num(dma_output_pj)},
          {"energy_pj.dma_matrix", num(dma_matrix_pj)},
          {"energy_pj.host", num(host_pj)},
          {"energy_pj.total", num(total_pj)}};
}

std::vector<std::pair<std::string, std::string>> PerfSummary::key_values() const {
  std::vector<std::pair<std::string, std::string>> kv{{"corner", to_string(corner)}};
  for (auto& e : cycles.key_values()) kv.push_back(std::move(e));
  for (auto& e : energy.key_values()) kv.push_back(std::move(e));
  kv.emplace_back("ops_1b", num(ops));
  kv.emplace_back("seconds", num(seconds));
  kv.emplace_back("throughput.peak_1b_tops", num(peak_tops));
  kv.emplace_back("throughput.effective_1b_tops", num(effective_tops));
  kv.emplace_back("efficiency.core_1b_tops_per_w", num(core_tops_per_w));
  kv.emplace_back("efficiency.system_1b_tops_per_w", num(system_tops_per_w));
  return kv;
}

PerfModel::PerfModel(CycleConstants cycles, EnergyTable table)
    : cycles_(cycles), table_(table) {
  cycles_.validate();
}

int64_t PerfModel::matrix_load_cycles(int segments) const {
  const int per_segment = std::max(cycles_.segment_transfer_cycles(), cycles_.load);
  return int64_t{segments} * per_segment;
}

int PerfModel::vector_transfer_cycles(int n, int bx) const {
  return static_cast<int>(words_for(static_cast<size_t>(n), bx)) * cycles_.dma_cycles_per_word;
}

int PerfModel::output_transfer_cycles(int m_logical, int by) const {
  return (m_logical * by + 31) / 32 * cycles_.dma_cycles_per_word;
}

CycleReport PerfModel::mvm_cycles(const ExecutionPlan& plan) const {
  if (!plan.lowered) fail(ErrorCode::UnloweredPlan, "plan '" + plan.label + "' is not lowered");
  const int64_t dpw = cycles_.dma_cycles_per_word;
  const int64_t per_plane = std::max(cycles_.initiation_interval, cycles_.near_mem);
  const int64_t compute = per_plane * plan.fmt_x.width();
  const int64_t out_words = int64_t{plan.output_words()} * dpw;
  const int64_t reload_in = int64_t{plan.reload_words} * dpw;
  const int64_t reuse_in = int64_t{plan.reuse_words} * dpw;
  const int64_t reuse_mvms = plan.mvm_count - plan.reload_mvms;

  CycleReport r;
  r.matrix_load = matrix_load_cycles(plan.segments);
  r.mvm_steady = plan.reload_mvms * std::max({compute, reload_in, out_words}) +
                 reuse_mvms * std::max({compute, reuse_in, out_words});
  if (plan.mvm_count > 0) {
    r.pipeline_fill = cycles_.cima +
                      (plan.path == ConversionPath::Adc ? cycles_.adc : cycles_.abn) +
                      cycles_.near_mem;
  }
  for (const auto& op : plan.host_ops) r.host += op.instructions;
  r.total = r.matrix_load + r.mvm_steady + r.pipeline_fill + r.host;

  r.compute = plan.mvm_count * compute;
  r.input_dma = plan.reload_mvms * reload_in + reuse_mvms * reuse_in;
  r.output_dma = plan.mvm_count * out_words;
  r.transfer_bound = (plan.reload_mvms > 0 && std::max(reload_in, out_words) > compute) ||
                     (reuse_mvms > 0 && std::max(reuse_in, out_words) > compute);
  return r;
}

EnergyReport PerfModel::mvm_energy(const ExecutionPlan& plan, Corner corner) const {
  if (!plan.lowered) fail(ErrorCode::UnloweredPlan, "plan '" + plan.label + "' is not lowered");
  const CornerEnergy& e = table_.at(corner);
  const double planes = static_cast<double>(plan.mvm_count) * plan.fmt_x.width();
  const double columns = plan.logical_outputs > 0 ? plan.m_phys() : 0.0;
  const double row_fraction = static_cast<double>(plan.n_conf()) / kRows;
  const double zf = std::clamp(plan.zero_fraction, 0.0, 1.0);
  const double array_share = (1.0 - kBroadcastShare) + kBroadcastShare * (1.0 - zf);

  EnergyReport r;
  r.cima_pj = planes * columns * e.cima_per_column_pj * row_fraction * array_share;
  r.conversion_pj = planes * columns *
                    (plan.path == ConversionPath::Adc ? e.adc_per_column_pj : e.abn_per_column_pj);
  if (plan.path == ConversionPath::Adc) {
    r.datapath_pj = planes * plan.logical_outputs * e.datapath_per_output_pj;
  }
  const double input_words = static_cast<double>(plan.reload_mvms) * plan.reload_words +
                             static_cast<double>(plan.mvm_count - plan.reload_mvms) * plan.reuse_words;
  r.reshape_pj = input_words * e.reshape_per_32b_input_pj;
  r.dma_input_pj = input_words * e.dma_per_32b_pj;
  r.dma_output_pj = static_cast<double>(plan.mvm_count) * plan.output_words() * e.dma_per_32b_pj;
  r.dma_matrix_pj = static_cast<double>(plan.segments) * (kSegmentBits / 32) * e.dma_per_32b_pj;
  for (const auto& op : plan.host_ops) {
    r.host_pj += static_cast<double>(op.instructions) * e.cpu_per_instr_pj +
                 static_cast<double>(op.memory_accesses) * e.pdmem_per_32b_pj;
  }
  r.total_pj = r.cima_pj + r.conversion_pj + r.datapath_pj + r.reshape_pj + r.dma_input_pj +
               r.dma_output_pj + r.dma_matrix_pj + r.host_pj;
  return r;
}

double PerfModel::plan_ops(const ExecutionPlan& plan) const {
  return 2.0 * plan.rows * plan.logical_outputs * plan.fmt_a.width() * plan.fmt_x.width() *
         static_cast<double>(plan.mvm_count);
}

PerfSummary PerfModel::summarize(std::span<const ExecutionPlan> plans, Corner corner) const {
  PerfSummary s;
  s.corner = corner;
  for (const auto& plan : plans) {
    const auto c = mvm_cycles(plan);
    const auto e = mvm_energy(plan, corner);
    s.cycles.matrix_load += c.matrix_load;
    s.cycles.mvm_steady += c.mvm_steady;
    s.cycles.pipeline_fill += c.pipeline_fill;
    s.cycles.host += c.host;
    s.cycles.total += c.total;
    s.cycles.compute += c.compute;
    s.cycles.input_dma += c.input_dma;
    s.cycles.output_dma += c.output_dma;
    s.cycles.transfer_bound = s.cycles.transfer_bound || c.transfer_bound;
    s.energy.cima_pj += e.cima_pj;
    s.energy.conversion_pj += e.conversion_pj;
    s.energy.datapath_pj += e.datapath_pj;
    s.energy.reshape_pj += e.reshape_pj;
    s.energy.dma_input_pj += e.dma_input_pj;
    s.energy.dma_output_pj += e.dma_output_pj;
    s.energy.dma_matrix_pj += e.dma_matrix_pj;
    s.energy.host_pj += e.host_pj;
    s.energy.total_pj += e.total_pj;
    s.ops += plan_ops(plan);
  }
  const double f = table_.at(corner).f_clk_hz;
  s.seconds = static_cast<double>(s.cycles.total) / f;
  if (s.cycles.compute > 0) s.peak_tops = s.ops / (static_cast<double>(s.cycles.compute) / f) / 1e12;
  if (s.seconds > 0) s.effective_tops = s.ops / s.seconds / 1e12;
  // one operation per picojoule is one TOPS/W
  if (s.energy.core_pj() > 0) s.core_tops_per_w = s.ops / s.energy.core_pj();
  if (s.energy.total_pj > 0) s.system_tops_per_w = s.ops / s.energy.total_pj;
  return s;
}

ExecutionPlan full_array_binary_plan(int64_t mvm_count) {
  ExecutionPlan p;
  p.lowered = true;
  p.label = "full-array-1b";
  p.fmt_a = NumberFormat::xnor(1);
  p.fmt_x = NumberFormat::xnor(1);
  p.mode = ComputeMode::Xnor;
  p.path = ConversionPath::Abn;
  p.rows = kRows;
  p.segments = kSegmentCount;
  p.logical_outputs = kColumns;
  p.full_scale = kRows;
  p.lossy = true;
  p.mvm_count = mvm_count;
  p.reload_mvms = mvm_count;
  p.reload_words = static_cast<int>(words_for(kRows, 1));
  p.output_bits = 1;
  p.abn_thresholds.assign(kColumns, 32);
  return p;
}

}  // namespace cimu
