/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

// Functional execution of a lowered network on the simulated CIMU: one
// Accelerator per resident tile, windows streamed through the reshaping
// buffer (with stride-shift reuse where the plan schedules it), row-tile
// partial sums and host stages applied on the "host".

#include <cstdint>
#include <string>
#include <vector>

#include "cimu/mapper.hpp"
#include "cimu/tensor.hpp"

namespace cimu {

struct NoiseConfig {
  double sigma = 0.0;
  uint64_t seed = 0;
};

/// Feature map in height, width, channel order.
struct FeatureMap {
  int height = 1;
  int width = 1;
  int channels = 0;
  std::vector<int64_t> values;
};

struct LayerTrace {
  std::string label;
  FeatureMap datapath;  // straight out of the CIMU (after PostOps / comparators)
  FeatureMap output;    // after host stages
  int64_t mvms = 0;
  int64_t stride_shifts = 0;
};

struct NetworkTrace {
  std::vector<LayerTrace> layers;
  const FeatureMap& output() const { return layers.back().output; }
};

/// `input` is [height, width, channels] (or any shape with that many
/// elements) in the network's input format. Throws ShapeMismatch.
NetworkTrace run_network(const LoweredNetwork& net, const QuantizedTensor& input,
                         const NoiseConfig& noise = {});

/// Element (y, x, c) of a 3x3 window around output pixel (oy, ox) in array
/// row order; zeros outside the map.
std::vector<int32_t> conv_window(const FeatureMap& in, int oy, int ox, int stride);

/// Input pixel column `ix`, rows top..top+2: 3C elements, ky-major.
std::vector<int32_t> conv_window_column(const FeatureMap& in, int top, int ix);

/// Applies a layer's host stages to the datapath feature map.
FeatureMap apply_host_stages(const LoweredLayer& layer, FeatureMap map);

}  // namespace cimu
