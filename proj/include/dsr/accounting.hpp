// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "dsr/topology.hpp"
#include "json.hpp"

namespace dsr {

// Counting conventions:
//   conv layer params      out*in*kh*kw + out
//   dense layer params     out*in + out
//   one multiply-accumulate = 2 ops
//   bicubic residual       2 * (4x4) ops per output pixel (zero at R = 1)
//   relu / leaky / softmax 1 op per element; identity is free

struct ParamCounts {
  std::uint64_t pixel_flow = 0;    // materialized process-CNN weights
  std::uint64_t control_flow = 0;  // stats CNN + logit map (no bias) + FCNN + kernel bank
};

ParamCounts count_params(const TopologySpec& spec);

struct OpsBreakdown {
  double pixel_ops_per_frame = 0.0;
  double control_ops_per_trigger = 0.0;
  double output_pixels = 0.0;
};

OpsBreakdown count_ops(const TopologySpec& spec, int in_height, int in_width);

/// (pixel_ops + control_ops / K) / (R^2 * in_pixels).
double count_ops_per_output_pixel(const TopologySpec& spec, long k, int in_height, int in_width);

/// ops_per_output_pixel * out_w * out_h * fps / 1e12.
double tops(double ops_per_output_pixel, double out_w, double out_h, double fps);

/// Conventional single-network SR stack used as the dense comparison point:
/// 8 conv layers of width 64 at input resolution, no control flow.
TopologySpec dense_reference_spec(int r = 4);

struct OpsReport {
  ParamCounts params;
  long k = 10;
  int in_height = 270;
  int in_width = 320;
  double fps = 30.0;
  double ops_per_output_pixel = 0.0;     // amortized over K
  double pixel_only_ops_per_output_pixel = 0.0;
  double control_ops_per_trigger = 0.0;
  double tops_amortized = 0.0;
  double tops_pixel_only = 0.0;

  nlohmann::json to_json() const;
  /// Aligned rows mirroring "# parameters / # ops per output pixel / # TOPs".
  std::string to_table() const;
};

OpsReport make_ops_report(const TopologySpec& spec, long k, int in_height, int in_width,
                          double fps);

/// Reference figures for the published comparison (1280x1080 @ 30 fps).
struct PublishedRow {
  const char* name;
  double ops_per_output_pixel;
  double tops;
};
inline constexpr PublishedRow kPublishedDense{"NDBP", 345328.0, 14.3};
inline constexpr PublishedRow kPublishedDualRate{"dual-rate (K=10)", 9574.0, 0.397};

/// Recomputes the TOPs column of both published rows; JSON with
/// reproduced value, published value and relative error.
nlohmann::json published_tops_check();

}  // namespace dsr
