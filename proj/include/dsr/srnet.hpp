// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dsr/ops.hpp"
#include "dsr/rng.hpp"
#include "dsr/topology.hpp"

namespace dsr {

struct StatsVector {
  std::vector<double> values;
};

/// User preferences; every component lies in [0,1].
struct PrefVector {
  std::vector<double> values;

  PrefVector() = default;
  explicit PrefVector(std::vector<double> v);
};

struct DenseLayer {
  int out = 0;
  int in = 0;
  std::vector<double> weights;  // (out, in) row-major
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(int out_width, int in_width);
  bool operator==(const DenseLayer&) const = default;
};

enum class ParamGroup { kStats, kLogit, kFcnn, kBank };
std::string to_string(ParamGroup g);

/// Every trainable value of the control flow. Gradients and optimizer
/// moments reuse this type.
struct ModelParams {
  std::vector<KernelStack> stats;
  // One-channel weight-logit conv on the final stats layer's input. Its bias
  // stays zero and is not enumerated: softmax ignores a constant shift.
  KernelStack logit;
  std::vector<DenseLayer> fcnn;
  std::vector<std::vector<KernelStack>> bank;  // [layer j][candidate i]

  static ModelParams zeros(const TopologySpec& spec);
  /// He-scaled Gaussian init; bank candidates are scaled by bank_gain.
  static ModelParams random(const TopologySpec& spec, Rng& rng, double bank_gain = 0.3);

  using Visitor = std::function<void(const std::string& name, ParamGroup group,
                                     std::span<double> values)>;
  using ConstVisitor = std::function<void(const std::string& name, ParamGroup group,
                                          std::span<const double> values)>;
  /// Fixed enumeration order: stats, logit, fcnn, bank (weights then bias).
  void for_each(const Visitor& v);
  void for_each(const ConstVisitor& v) const;
  std::size_t count() const;

  void check_shapes(const TopologySpec& spec) const;
  bool operator==(const ModelParams&) const = default;
};

/// Per process layer, kernel coefficients alpha and bias coefficients beta.
/// With shared coefficients beta == alpha.
struct MixCoefficients {
  std::vector<std::vector<double>> alpha;
  std::vector<std::vector<double>> beta;
};

/// Materialized process-CNN weights. Immutable; every layer is stamped with
/// the generation and the whole set carries a checksum so a torn snapshot is
/// detectable.
class ProcessWeights {
 public:
  ProcessWeights(std::vector<KernelStack> layers, std::uint64_t generation);

  const std::vector<KernelStack>& layers() const noexcept { return layers_; }
  std::uint64_t generation() const noexcept { return generation_; }
  const std::vector<std::uint64_t>& layer_generations() const noexcept { return stamps_; }
  std::uint64_t checksum() const noexcept { return checksum_; }
  /// Recomputes the checksum and checks every layer stamp.
  bool verify() const;

 private:
  static std::uint64_t compute_checksum(const std::vector<KernelStack>& layers,
                                        std::uint64_t generation);
  std::vector<KernelStack> layers_;
  std::vector<std::uint64_t> stamps_;
  std::uint64_t generation_;
  std::uint64_t checksum_;
};

/// softmax(weight_logits) over all pixels, then a weighted average of every
/// feature channel.
StatsVector global_weighted_average(const Tensor& features, const Tensor& weight_logits);
struct GwaGrads {
  Tensor features;
  Tensor logits;
};
GwaGrads global_weighted_average_backward(const Tensor& features, const Tensor& weight_logits,
                                          std::span<const double> grad_out);

StatsVector stats_forward(const Tensor& frame, const ModelParams& params,
                          const TopologySpec& spec);
/// FCNN on concat(stats, prefs); simplex mixing applies a per-layer softmax.
MixCoefficients mix_coefficients(const StatsVector& stats, const PrefVector& prefs,
                                 const ModelParams& params, const TopologySpec& spec);
/// ker_j = sum_i alpha_ij ker_ij, bias_j = sum_i beta_ij b_ij.
ProcessWeights mix_kernels(const MixCoefficients& coeffs,
                           const std::vector<std::vector<KernelStack>>& bank,
                           std::uint64_t generation);
ProcessWeights mix_weights(const StatsVector& stats, const PrefVector& prefs,
                           const ModelParams& params, const TopologySpec& spec,
                           std::uint64_t generation);
/// Single-channel frame in, R x upscaled frame out:
/// pixel_shuffle(trunk(frame)) + bicubic_resize(frame, R).
Tensor process_forward(const Tensor& frame, const ProcessWeights& w, const TopologySpec& spec);
/// Configuration flow and pixel flow on one frame with fresh weights.
Tensor sr_forward(const Tensor& frame, const ModelParams& params, const PrefVector& prefs,
                  const TopologySpec& spec);

/// sr_forward with every intermediate recorded, so the adjoint of a scalar
/// loss can be pulled back to all of ModelParams.
class SrGraph {
 public:
  explicit SrGraph(const TopologySpec& spec);

  Tensor forward(const Tensor& frame, const ModelParams& params, const PrefVector& prefs);
  /// Accumulates d(loss)/d(params) into grads (same shapes as params).
  void backward(const Tensor& grad_out, ModelParams& grads) const;

  /// Pixel-shuffled trunk output of the last forward call (the output minus
  /// the bicubic residual).
  const Tensor& trunk_output() const { return trunk_; }
  /// Hash of the sign pattern of every ReLU / leaky-ReLU input in the last
  /// forward call. Equal signatures mean the same linear piece.
  std::uint64_t kink_signature() const;

 private:
  TopologySpec spec_;
  ModelParams params_;
  bool evaluated_ = false;

  std::vector<Conv2dOp> stats_convs_;
  std::vector<ActivationOp> stats_acts_;
  Conv2dOp logit_conv_{Padding::kReflect};
  Tensor features_;
  Tensor logits_;
  std::vector<std::vector<double>> fcnn_inputs_;
  std::vector<std::vector<double>> fcnn_pre_;
  std::vector<double> fcnn_out_;
  MixCoefficients coeffs_;
  std::vector<KernelStack> mixed_;
  std::vector<Conv2dOp> proc_convs_;
  std::vector<ActivationOp> proc_acts_;
  Tensor trunk_;
};

}  // namespace dsr
