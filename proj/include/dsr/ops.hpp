// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "dsr/tensor.hpp"

namespace dsr {

enum class Padding { kReflect, kZero, kValid };

struct Activation {
  enum class Kind { kRelu, kLeakyRelu, kIdentity };
  Kind kind = Kind::kRelu;
  double slope = 0.0;  // leaky_relu only

  static Activation relu() { return {Kind::kRelu, 0.0}; }
  static Activation leaky_relu(double s) { return {Kind::kLeakyRelu, s}; }
  static Activation identity() { return {Kind::kIdentity, 0.0}; }

  bool operator==(const Activation&) const = default;
};

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

/// Positive rational scale factor num/den.
struct Ratio {
  int num = 1;
  int den = 1;
};

struct Phase {
  int row = 0;
  int col = 0;
};

// Forward primitives. Every function is pure.

/// Cross-correlation (no kernel flip) plus per-channel bias.
Tensor conv2d(const Tensor& input, const KernelStack& kernel, Padding padding);
Tensor activate(const Tensor& x, Activation a);
/// Catmull-Rom (a = -0.5) resampling with half-pixel centers and clamped
/// edges. Downscaling widens the kernel by 1/factor and renormalizes taps.
Tensor bicubic_resize(const Tensor& x, Ratio factor);
/// (H, W, n*n) -> (nH, nW, 1); channel c of cell (r, q) lands at
/// (n*r + c / n, n*q + c % n).
Tensor pixel_shuffle(const Tensor& x, int n);
Tensor pixel_unshuffle(const Tensor& x, int n);
Tensor decimate(const Tensor& x, int s, Phase phase = {});

// Reverse-mode adjoints. Each takes the forward inputs plus the gradient of a
// scalar with respect to the forward output.

struct Conv2dGrads {
  Tensor input;         // empty when not requested
  KernelStack kernel;   // weights and bias hold d/dweights, d/dbias
};

Conv2dGrads conv2d_backward(const Tensor& input, const KernelStack& kernel,
                            Padding padding, const Tensor& grad_out,
                            bool want_input = true);
Tensor activate_backward(const Tensor& pre, Activation a, const Tensor& grad_out);
Tensor bicubic_resize_backward(int in_height, int in_width, Ratio factor,
                               const Tensor& grad_out);
Tensor pixel_shuffle_backward(const Tensor& grad_out, int n);
Tensor decimate_backward(int in_height, int in_width, int s, Phase phase,
                         const Tensor& grad_out);

// Op instances that record their forward inputs so the adjoint can be
// requested later. Asking for the adjoint before forward() is a contract
// violation.

class Conv2dOp {
 public:
  explicit Conv2dOp(Padding padding = Padding::kReflect) : padding_(padding) {}
  Tensor forward(const Tensor& input, const KernelStack& kernel);
  Conv2dGrads backward(const Tensor& grad_out, bool want_input = true) const;
  const Tensor& input() const;

 private:
  Padding padding_;
  std::optional<Tensor> input_;
  std::optional<KernelStack> kernel_;
};

class ActivationOp {
 public:
  explicit ActivationOp(Activation a) : act_(a) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;
  Activation activation() const noexcept { return act_; }
  /// Input recorded by the last forward call, or null.
  const Tensor* saved_input() const noexcept { return pre_ ? &*pre_ : nullptr; }

 private:
  Activation act_;
  std::optional<Tensor> pre_;
};

class BicubicOp {
 public:
  explicit BicubicOp(Ratio factor) : factor_(factor) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Ratio factor_;
  std::optional<std::pair<int, int>> in_dims_;
};

class PixelShuffleOp {
 public:
  explicit PixelShuffleOp(int n) : n_(n) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  int n_;
  bool evaluated_ = false;
};

class DecimateOp {
 public:
  DecimateOp(int s, Phase phase) : s_(s), phase_(phase) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  int s_;
  Phase phase_;
  std::optional<std::pair<int, int>> in_dims_;
};

}  // namespace dsr
