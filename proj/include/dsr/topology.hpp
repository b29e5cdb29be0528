// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "dsr/ops.hpp"
#include "json.hpp"

namespace dsr {

struct LayerSpec {
  int out_channels = 1;
  int taps = 3;
  Activation activation = Activation::relu();

  bool operator==(const LayerSpec&) const = default;
};

/// Shape of the three networks. The statistics vector width is the final
/// stats layer's out_channels; that layer also feeds a one-channel logit
/// conv used for the global weighted average.
struct TopologySpec {
  int input_channels = 1;
  std::vector<LayerSpec> stats_layers;
  std::vector<int> fcnn_hidden;       // hidden widths; output width is derived
  Activation fcnn_activation = Activation::relu();  // hidden layers; output is identity
  std::vector<int> bank_size;         // m_j candidate kernels per process layer
  std::vector<LayerSpec> process_layers;
  int R = 4;
  int pref_dim = 1;
  bool simplex_mixing = false;        // softmax over each layer's coefficients
  bool independent_bias_coeffs = false;

  /// stats 8,16,16,16 (3x3) -> d_s = 16; FCNN 32, 32; process 12, 12, R^2
  /// (3x3) with 8 candidates per layer; one preference input.
  static TopologySpec desk_default(int r = 4);

  bool has_control_flow() const { return !stats_layers.empty(); }
  int stats_dim() const;
  int fcnn_in() const { return stats_dim() + pref_dim; }
  int fcnn_out() const;
  int coeff_count() const;  // sum of m_j
  int process_in_channels(std::size_t layer) const;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;

  nlohmann::json to_json() const;
  static TopologySpec from_json(const nlohmann::json& j);

  bool operator==(const TopologySpec&) const = default;
};

}  // namespace dsr
