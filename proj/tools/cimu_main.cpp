/* SPDX-License-Identifier: Apache-2.0 */
// cimu: batch front end to the simulator.
//
//   cimu [global flags] <command> [options]
//
// Every error exits nonzero with a single "Code: message" line on stderr:
// 2 for input errors, 3 for capacity / plan errors, 4 for internal invariant
// violations.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cimu/accelerator.hpp"
#include "cimu/error.hpp"
#include "cimu/fileio.hpp"
#include "cimu/mapper.hpp"
#include "cimu/perf_model.hpp"
#include "cimu/runner.hpp"
#include "cimu/verify_oracle.hpp"

namespace fs = std::filesystem;
using namespace cimu;

namespace {

struct GlobalOptions {
  std::string corner = "high";
  uint64_t seed = 1;
  int ii = 25;
  double noise_sigma = 0.0;
  std::string full_scale_policy = "auto";
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::CapacityExceeded:
    case ErrorCode::SegmentOutOfRange:
    case ErrorCode::QuantaOutOfRange:
    case ErrorCode::UnloweredPlan:
    case ErrorCode::UnsupportedKernel:
    case ErrorCode::BankBusy:
      return 3;
    case ErrorCode::InvariantViolation:
      return 4;
    default:
      return 2;
  }
}

/// 0 = automatic, else the fixed full scale.
int fixed_full_scale(const std::string& policy) {
  if (policy == "auto") return 0;
  if (policy.rfind("fixed:", 0) == 0) {
    try {
      size_t used = 0;
      const std::string digits = policy.substr(6);
      const int k = std::stoi(digits, &used);
      if (used == digits.size() && k >= 1 && k <= kMaxFullScale) return k;
    } catch (const std::exception&) {
    }
  }
  fail(ErrorCode::InvalidConfig, "--full-scale-policy must be auto or fixed:K with K in 1..2304");
}

PerfModel make_model(const GlobalOptions& g) {
  CycleConstants c;
  c.initiation_interval = g.ii;
  c.validate();
  return PerfModel(c, EnergyTable::measured());
}

void emit_report(const KeyValues& kv, const std::string& path) {
  const std::string text = format_key_values(kv);
  std::cout << text;
  if (!path.empty()) write_file_atomic(path, text);
}

void append(KeyValues& kv, const std::vector<std::pair<std::string, std::string>>& more) {
  kv.insert(kv.end(), more.begin(), more.end());
}

std::string num(double v) { return fmt::format("{:.6g}", v); }

// ---------------------------------------------------------------------------

struct MvmOptions {
  std::string matrix, vector, out, report;
};

int cmd_run_mvm(const GlobalOptions& g, const MvmOptions& o) {
  const QuantizedTensor a = read_tensor(o.matrix);
  a.validate();
  if (a.shape.size() != 2) fail(ErrorCode::ShapeMismatch, "matrix file must be 2-D");
  const QuantizedTensor x = read_tensor(o.vector);
  x.validate_allowing_zero();
  const ComputeMode mode = mode_for(a.format);
  if (mode_for(x.format) != mode) {
    fail(ErrorCode::ModeFormatMismatch, "matrix " + a.format.to_string() + " with vector " + x.format.to_string());
  }

  Accelerator acc;
  acc.load(a);  // CapacityExceeded before any shape check on x
  const int n = static_cast<int>(a.cols());
  const int zeros = static_cast<int>(std::count(x.data.begin(), x.data.end(), 0));
  const int fixed = fixed_full_scale(g.full_scale_policy);
  const FullScaleChoice choice = fixed ? FullScaleChoice{fixed, fixed < std::min(n - zeros, n) || fixed > kAdcMaxCode}
                                       : choose_full_scale(n, zeros);
  const AdcModel adc{choice.full_scale, g.noise_sigma, g.seed};
  const auto y = acc.run(x.data, x.format, adc);
  if (!o.out.empty()) write_values(o.out, {y.size()}, y);

  ExecutionPlan plan;
  plan.lowered = true;
  plan.label = "mvm";
  plan.fmt_a = a.format;
  plan.fmt_x = x.format;
  plan.mode = mode;
  plan.rows = n;
  plan.logical_outputs = static_cast<int>(a.rows());
  plan.row_quanta = acc.array().row_quanta();
  plan.col_quanta = acc.array().col_quanta();
  plan.full_scale = choice.full_scale;
  plan.guaranteed_zeros = zeros;
  plan.lossy = choice.lossy;
  plan.segments = (n + 2) / 3;
  plan.mvm_count = 1;
  plan.reload_mvms = 1;
  plan.reload_words = static_cast<int>(words_for(static_cast<size_t>(n), x.format.width()));
  plan.output_bits = output_width(x.format.width(), a.format.width());
  plan.zero_fraction = static_cast<double>(plan.n_conf() - n + (mode == ComputeMode::Xnor ? zeros : 0)) / plan.n_conf();

  const PerfModel model = make_model(g);
  const auto summary = model.summarize(std::span(&plan, 1), parse_corner(g.corner));
  KeyValues kv{{"command", "run-mvm"},
               {"rows", std::to_string(n)},
               {"outputs", std::to_string(a.rows())},
               {"format_a", a.format.to_string()},
               {"format_x", x.format.to_string()},
               {"mode", to_string(mode)},
               {"full_scale", std::to_string(choice.full_scale)},
               {"lossy", choice.lossy ? "true" : "false"},
               {"n_nonmasked", std::to_string(acc.last_n_nonmasked())},
               {"noise_sigma", num(g.noise_sigma)},
               {"seed", std::to_string(g.seed)}};
  append(kv, summary.key_values());
  emit_report(kv, o.report);
  return 0;
}

// ---------------------------------------------------------------------------

struct NetworkOptions {
  std::string net, input, out_dir, report;
  bool dry_run = false;
  bool check = false;
};

QuantizedTensor random_input(const LoweredNetwork& net, uint64_t seed) {
  auto t = QuantizedTensor::matrix(static_cast<size_t>(net.height * net.width), static_cast<size_t>(net.channels),
                                   net.input_format);
  t.shape = {static_cast<size_t>(net.height), static_cast<size_t>(net.width), static_cast<size_t>(net.channels)};
  const auto values = net.input_format.representable_values();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, values.size() - 1);
  for (auto& v : t.data) v = values[pick(rng)];
  return t;
}

int cmd_run_network(const GlobalOptions& g, const NetworkOptions& o) {
  const NetworkGraph graph = load_network(o.net);
  LowerOptions lo;
  lo.dry_run = o.dry_run;
  lo.seed = g.seed;
  lo.fixed_full_scale = fixed_full_scale(g.full_scale_policy);
  const LoweredNetwork net = lower_network(graph, lo);
  const PerfModel model = make_model(g);
  const auto plans = net.plans();
  const auto summary = model.summarize(plans, parse_corner(g.corner));

  KeyValues kv{{"command", "run-network"},
               {"network", net.name},
               {"dry_run", o.dry_run ? "true" : "false"},
               {"layers", std::to_string(net.layers.size())},
               {"tiles", std::to_string(plans.size())}};
  int lossy_tiles = 0;
  for (const auto& p : plans) lossy_tiles += p.lossy ? 1 : 0;
  kv.emplace_back("lossy_tiles", std::to_string(lossy_tiles));
  for (const auto& layer : net.layers) {
    const std::string key = "layer." + layer.label;
    kv.emplace_back(key + ".shape", fmt::format("{}x{}x{}", layer.out_h, layer.out_w, layer.out_c));
    kv.emplace_back(key + ".path", to_string(layer.path));
    kv.emplace_back(key + ".tiles", std::to_string(layer.tiles.size()));
    kv.emplace_back(key + ".stride_reuse", layer.stride_reuse ? "true" : "false");
    kv.emplace_back(key + ".full_scale", std::to_string(layer.tiles.front().full_scale));
  }

  if (!o.dry_run) {
    const QuantizedTensor input = o.input.empty() ? random_input(net, g.seed ^ 0x5eedull) : read_tensor(o.input);
    const auto trace = run_network(net, input, NoiseConfig{g.noise_sigma, g.seed});
    if (!o.out_dir.empty()) {
      fs::create_directories(o.out_dir);
      for (const auto& lt : trace.layers) {
        const auto& m = lt.output;
        write_values(fs::path(o.out_dir) / (lt.label + ".out"),
                     {static_cast<size_t>(m.height), static_cast<size_t>(m.width), static_cast<size_t>(m.channels)},
                     m.values);
      }
    }
    const auto& out = trace.output();
    std::string values;
    for (size_t k = 0; k < out.values.size() && k < 16; ++k) values += (k ? "," : "") + std::to_string(out.values[k]);
    kv.emplace_back("output.shape", fmt::format("{}x{}x{}", out.height, out.width, out.channels));
    kv.emplace_back("output.head", values);
    if (o.check) {
      const FeatureMap ref = reference_network(net, input);
      const bool match = ref.values == out.values;
      kv.emplace_back("reference_match", match ? "true" : "false");
      if (!match) {
        emit_report(kv, o.report);
        fail(ErrorCode::InvariantViolation, "network output differs from the integer reference");
      }
    }
  }

  append(kv, summary.key_values());
  const double uj = summary.energy.total_pj * 1e-6;
  kv.emplace_back("energy_uj_per_inference", num(uj));
  kv.emplace_back("inferences_per_s", num(summary.seconds > 0 ? 1.0 / summary.seconds : 0.0));
  emit_report(kv, o.report);
  return 0;
}

// ---------------------------------------------------------------------------

struct SqnrOptions {
  int n = 255;
  std::string mode = "xnor";
  std::vector<int> ba{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> bx{1, 2, 4, 8};
  double sparsity = 0.0;
  int trials = 1000;
  int outputs = 16;
  std::string out;
};

int cmd_sqnr(const GlobalOptions& g, const SqnrOptions& o) {
  SqnrConfig cfg;
  cfg.n = o.n;
  cfg.mode = parse_mode(o.mode);
  cfg.sparsity = o.sparsity;
  cfg.full_scale = fixed_full_scale(g.full_scale_policy);
  cfg.trials = o.trials;
  cfg.outputs = o.outputs;
  cfg.seed = g.seed;
  cfg.noise_sigma = g.noise_sigma;
  for (const int b : o.ba) {
    if (b < kMinWidth || b > kMaxWidth) fail(ErrorCode::InvalidConfig, "B_A values must be in 1..8");
  }
  for (const int b : o.bx) {
    if (b < kMinWidth || b > kMaxWidth) fail(ErrorCode::InvalidConfig, "B_x values must be in 1..8");
  }
  const auto curve = sqnr_sweep(cfg, o.ba, o.bx);
  const std::string text = curve.csv();
  if (!o.out.empty()) write_file_atomic(o.out, text);
  std::cout << text;
  return 0;
}

struct LinearityOptions {
  std::string path = "adc";
  int n = 255;
  int columns = kColumns;
  std::string out;
};

int cmd_linearity(const GlobalOptions& g, const LinearityOptions& o) {
  LinearityConfig cfg;
  if (o.path == "adc") cfg.path = ConversionPath::Adc;
  else if (o.path == "abn") cfg.path = ConversionPath::Abn;
  else fail(ErrorCode::InvalidConfig, "--path must be adc or abn");
  cfg.n = o.n;
  const int fixed = fixed_full_scale(g.full_scale_policy);
  cfg.full_scale = fixed ? fixed : choose_full_scale(o.n, 0).full_scale;
  cfg.columns = o.columns;
  cfg.noise_sigma = g.noise_sigma;
  cfg.seed = g.seed;
  const std::string text = linearity_sweep(cfg).csv();
  if (!o.out.empty()) write_file_atomic(o.out, text);
  std::cout << text;
  return 0;
}

struct PerfOptions {
  int64_t mvms = 1;
  std::string report;
};

int cmd_perf(const GlobalOptions& g, const PerfOptions& o) {
  const PerfModel model = make_model(g);
  const Corner corner = parse_corner(g.corner);
  if (o.mvms < 1) fail(ErrorCode::InvalidConfig, "--mvms must be positive");
  const ExecutionPlan plan = full_array_binary_plan(o.mvms);
  const auto summary = model.summarize(std::span(&plan, 1), corner);
  KeyValues kv{{"command", "perf"},
               {"plan", plan.label},
               {"initiation_interval", std::to_string(model.constants().initiation_interval)},
               {"segment_cycles", std::to_string(model.constants().segment_transfer_cycles())},
               {"matrix_load_cycles", std::to_string(model.matrix_load_cycles())},
               {"vector_transfer_cycles", std::to_string(model.vector_transfer_cycles(kRows, 1))},
               {"f_clk_hz", num(model.table().at(corner).f_clk_hz)}};
  append(kv, summary.key_values());
  emit_report(kv, o.report);
  return 0;
}

struct GenOptions {
  int rows = 64;
  int cols = 255;
  int ba = 4;
  int bx = 4;
  std::string mode = "and";
  double sparsity = 0.0;
  std::string out_dir;
  bool packed = false;
};

int cmd_gen_mvm(const GlobalOptions& g, const GenOptions& o) {
  const ComputeMode mode = parse_mode(o.mode);
  const NumberFormat fa = mode == ComputeMode::Xnor ? NumberFormat::xnor(o.ba) : NumberFormat::twos(o.ba);
  const NumberFormat fx = mode == ComputeMode::Xnor ? NumberFormat::xnor(o.bx) : NumberFormat::twos(o.bx);
  if (o.rows < 1 || o.cols < 1) fail(ErrorCode::InvalidConfig, "--rows and --cols must be positive");
  if (o.sparsity < 0.0 || o.sparsity > 1.0) fail(ErrorCode::InvalidConfig, "--sparsity must be in [0, 1]");
  std::mt19937_64 rng(g.seed);
  auto a = QuantizedTensor::matrix(static_cast<size_t>(o.rows), static_cast<size_t>(o.cols), fa);
  const auto av = fa.representable_values();
  std::uniform_int_distribution<size_t> pa(0, av.size() - 1);
  for (auto& v : a.data) v = av[pa(rng)];
  auto x = QuantizedTensor::vector(std::vector<int32_t>(static_cast<size_t>(o.cols), 0), fx);
  const auto xv = fx.representable_values();
  std::uniform_int_distribution<size_t> px(0, xv.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& v : x.data) v = unit(rng) < o.sparsity ? 0 : xv[px(rng)];

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  write_tensor(dir / "A.bin", a);
  if (o.packed) {
    if (!fx.representable(0) && std::count(x.data.begin(), x.data.end(), 0) > 0) {
      fail(ErrorCode::InvalidConfig, "packed " + fx.to_string() + " vectors cannot carry zeros");
    }
    write_packed(dir / "x.bin", pack(input_codes(x.data, fx), fx.width()), fx);
  } else {
    write_tensor(dir / "x.bin", x);
  }
  const auto y = reference_mvm(a, x);
  write_values(dir / "y_ref.bin", {y.size()}, y);
  std::cout << "wrote " << (dir / "A.bin").string() << ", x.bin, y_ref.bin\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Charge-domain in-memory-computing MVM accelerator simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--corner", g.corner, "Energy corner: high or low")->check(CLI::IsMember({"high", "low"}));
  app.add_option("--seed", g.seed, "Seed for random data and noise");
  app.add_option("--ii", g.ii, "CIMA initiation interval in cycles")->check(CLI::PositiveNumber);
  app.add_option("--noise-sigma", g.noise_sigma, "Column-sum noise sigma in unit charges")->check(CLI::NonNegativeNumber);
  app.add_option("--full-scale-policy", g.full_scale_policy, "auto or fixed:K");

  MvmOptions mvm;
  auto* run_mvm = app.add_subcommand("run-mvm", "Single matrix-vector multiply");
  run_mvm->add_option("--matrix", mvm.matrix, "Matrix tensor file")->required();
  run_mvm->add_option("--vector", mvm.vector, "Input vector (flat or packed)")->required();
  run_mvm->add_option("--out", mvm.out, "Output vector file");
  run_mvm->add_option("--report", mvm.report, "Report file");

  NetworkOptions net;
  auto* run_net = app.add_subcommand("run-network", "Lower and run a network description");
  run_net->add_option("--net", net.net, "Network description")->required();
  run_net->add_option("--input", net.input, "Input tensor [h, w, c]; random when omitted");
  run_net->add_option("--out-dir", net.out_dir, "Directory for per-layer outputs");
  run_net->add_option("--report", net.report, "Report file");
  run_net->add_flag("--dry-run", net.dry_run, "Shapes and cost only");
  run_net->add_flag("--check", net.check, "Compare against the integer reference");

  SqnrOptions sq;
  auto* sqnr = app.add_subcommand("sqnr-sweep", "SQNR over B_A and B_x");
  sqnr->add_option("--n", sq.n, "Rows per column")->check(CLI::Range(1, kRows));
  sqnr->add_option("--mode", sq.mode, "xnor or and")->check(CLI::IsMember({"xnor", "and"}));
  sqnr->add_option("--ba", sq.ba, "Matrix widths")->delimiter(',');
  sqnr->add_option("--bx", sq.bx, "Input widths")->delimiter(',');
  sqnr->add_option("--sparsity", sq.sparsity, "Share of zero input elements")->check(CLI::Range(0.0, 1.0));
  sqnr->add_option("--trials", sq.trials, "Trials per cell")->check(CLI::PositiveNumber);
  sqnr->add_option("--outputs", sq.outputs, "Outputs per trial")->check(CLI::PositiveNumber);
  sqnr->add_option("--out", sq.out, "CSV output file");

  LinearityOptions lin;
  auto* linearity = app.add_subcommand("linearity", "All-ones converter transfer sweep");
  linearity->add_option("--path", lin.path, "adc or abn")->check(CLI::IsMember({"adc", "abn"}));
  linearity->add_option("--n", lin.n, "Rows loaded with ones")->check(CLI::Range(1, kRows));
  linearity->add_option("--columns", lin.columns, "Columns to record")->check(CLI::Range(1, kColumns));
  linearity->add_option("--out", lin.out, "CSV output file");

  PerfOptions perf;
  auto* perf_cmd = app.add_subcommand("perf", "Cycle and energy report for the full-array 1-b configuration");
  perf_cmd->add_option("--mvms", perf.mvms, "MVMs streamed after the matrix load");
  perf_cmd->add_option("--report", perf.report, "Report file");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-mvm", "Random matrix, vector and oracle output");
  gen_cmd->add_option("--rows", gen.rows, "Matrix rows (outputs)");
  gen_cmd->add_option("--cols", gen.cols, "Matrix columns (inputs)");
  gen_cmd->add_option("--ba", gen.ba, "Matrix width")->check(CLI::Range(1, 8));
  gen_cmd->add_option("--bx", gen.bx, "Input width")->check(CLI::Range(1, 8));
  gen_cmd->add_option("--mode", gen.mode, "xnor or and")->check(CLI::IsMember({"xnor", "and"}));
  gen_cmd->add_option("--sparsity", gen.sparsity, "Share of zero input elements");
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  gen_cmd->add_flag("--packed", gen.packed, "Write the vector as packed 32-b words");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ParseError: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*run_mvm) return cmd_run_mvm(g, mvm);
    if (*run_net) return cmd_run_network(g, net);
    if (*sqnr) return cmd_sqnr(g, sq);
    if (*linearity) return cmd_linearity(g, lin);
    if (*perf_cmd) return cmd_perf(g, perf);
    if (*gen_cmd) return cmd_gen_mvm(g, gen);
  } catch (const Error& e) {
    std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "IoError: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "InvariantViolation: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
