/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Brute-force references and measurement harnesses: integer MVM and network
// inference by plain loops, SQNR of the simulated pipeline against them, and
// all-ones linearity sweeps of the converters.

#include <cstdint>
#include <string>
#include <vector>

#include "cimu/cima_array.hpp"
#include "cimu/mapper.hpp"
#include "cimu/plan.hpp"
#include "cimu/runner.hpp"
#include "cimu/tensor.hpp"

namespace cimu {

/// y[m] = sum_n A[m][n] * x[n]. Throws ShapeMismatch.
std::vector<int64_t> reference_mvm(const QuantizedTensor& a, const QuantizedTensor& x);

/// Layer-by-layer integer inference of a lowered network using direct
/// convolution loops; comparator layers use the folded threshold on the exact
/// column sum.
FeatureMap reference_network(const LoweredNetwork& net, const QuantizedTensor& input);

// ---------------------------------------------------------------------------

struct SqnrConfig {
  int n = 255;
  int ba = 1;
  int bx = 1;
  ComputeMode mode = ComputeMode::Xnor;
  double sparsity = 0.0;   // share of input elements forced to zero
  int full_scale = 0;      // 0 = choose_full_scale
  int trials = 1000;
  int outputs = 16;        // logical outputs per trial (capped at 256 / ba)
  uint64_t seed = 1;
  double noise_sigma = 0.0;
};

struct SqnrResult {
  double signal = 0.0;  // sum of y_ref^2
  double error = 0.0;   // sum of (y_ref - y_sim)^2
  int full_scale = 0;
  int64_t samples = 0;

  bool exact() const noexcept { return error == 0.0; }
  double db() const;
  /// "exact" or the dB value with three decimals.
  std::string text() const;
};

/// Fresh uniform matrix and input vector per trial, SQNR pooled over all
/// outputs of all trials.
SqnrResult measure_sqnr(const SqnrConfig& config);

struct SqnrCurve {
  SqnrConfig config;
  std::vector<int> ba_axis;
  std::vector<int> bx_values;
  std::vector<std::vector<SqnrResult>> series;  // [bx index][ba index]

  /// Comment lines with the configuration, then `bx,ba=..,ba=..` rows.
  std::string csv() const;
};

SqnrCurve sqnr_sweep(const SqnrConfig& base, const std::vector<int>& ba_axis,
                     const std::vector<int>& bx_values);

// ---------------------------------------------------------------------------

struct LinearityConfig {
  ConversionPath path = ConversionPath::Adc;
  int n = 255;              // rows loaded with ones; k sweeps 0..n
  int full_scale = 255;
  int columns = kColumns;
  double noise_sigma = 0.0;
  uint64_t seed = 1;
};

struct LinearityRow {
  int k = 0;
  std::vector<int> per_column;  // ADC code or ABN transition threshold
  double mean = 0.0;
  double sigma = 0.0;
};

struct LinearityTable {
  LinearityConfig config;
  std::vector<LinearityRow> rows;

  /// `k,mean,sigma,col0,col1,...` rows after comment lines.
  std::string csv() const;
};

/// ABN rows record the smallest threshold code at which the comparator
/// output is 0 (64 when it never is).
LinearityTable linearity_sweep(const LinearityConfig& config);

}  // namespace cimu
