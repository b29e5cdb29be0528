// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dsr/errors.hpp"

namespace dsr {

/// Dense H x W x C grid of samples, row-major (row, column, channel).
///
/// Images carry nominal values in [0,1]; feature maps are unbounded. All
/// arithmetic is double precision (the training and test path); there is no
/// separate single-precision inference path in this build.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int height, int width, int channels, double fill = 0.0);
  Tensor(int height, int width, int channels, std::vector<double> data);

  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  int channels() const noexcept { return c_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Tensor& o) const noexcept {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

  double& operator()(int r, int q, int ch) noexcept {
    return data_[(static_cast<std::size_t>(r) * w_ + q) * c_ + ch];
  }
  double operator()(int r, int q, int ch) const noexcept {
    return data_[(static_cast<std::size_t>(r) * w_ + q) * c_ + ch];
  }
  double* pixel(int r, int q) noexcept {
    return data_.data() + (static_cast<std::size_t>(r) * w_ + q) * c_;
  }
  const double* pixel(int r, int q) const noexcept {
    return data_.data() + (static_cast<std::size_t>(r) * w_ + q) * c_;
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  bool all_finite() const noexcept;

  /// Copy of channel range [first, first + count).
  Tensor channel_slice(int first, int count) const;

  bool operator==(const Tensor& o) const noexcept {
    return same_shape(o) && data_ == o.data_;
  }

 private:
  int h_ = 0;
  int w_ = 0;
  int c_ = 0;
  std::vector<double> data_;
};

/// Weights of one convolution layer: (out, in, row, col) row-major plus one
/// bias per output channel. Taps are odd so the support is centered.
struct KernelStack {
  int out_channels = 0;
  int in_channels = 0;
  int k_h = 0;
  int k_w = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  KernelStack() = default;
  KernelStack(int out, int in, int kh, int kw);

  std::size_t weight_count() const noexcept { return weights.size(); }
  double& at(int o, int i, int r, int q) noexcept {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * k_h + r) * k_w + q];
  }
  double at(int o, int i, int r, int q) const noexcept {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * k_h + r) * k_w + q];
  }
  bool same_shape(const KernelStack& o) const noexcept {
    return out_channels == o.out_channels && in_channels == o.in_channels &&
           k_h == o.k_h && k_w == o.k_w;
  }
  void validate() const;

  bool operator==(const KernelStack&) const = default;
};

/// Sum over all elements.
double sum(const Tensor& t);
/// Elementwise a + b (same shape).
Tensor add(const Tensor& a, const Tensor& b);
/// Elementwise a * s.
Tensor scale(const Tensor& a, double s);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace dsr
