// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsr {

Tensor::Tensor(int height, int width, int channels, double fill)
    : h_(height), w_(width), c_(channels) {
  DSR_REQUIRE(height > 0 && width > 0 && channels > 0,
              "tensor dimensions must be positive");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Tensor::Tensor(int height, int width, int channels, std::vector<double> data)
    : h_(height), w_(width), c_(channels), data_(std::move(data)) {
  DSR_REQUIRE(height > 0 && width > 0 && channels > 0,
              "tensor dimensions must be positive");
  DSR_REQUIRE(data_.size() == static_cast<std::size_t>(height) * width * channels,
              "tensor data length must equal height*width*channels");
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor Tensor::channel_slice(int first, int count) const {
  DSR_REQUIRE(first >= 0 && count > 0 && first + count <= c_,
              "channel slice out of range");
  Tensor out(h_, w_, count);
  for (int r = 0; r < h_; ++r)
    for (int q = 0; q < w_; ++q)
      std::copy_n(pixel(r, q) + first, count, out.pixel(r, q));
  return out;
}

KernelStack::KernelStack(int out, int in, int kh, int kw)
    : out_channels(out), in_channels(in), k_h(kh), k_w(kw) {
  DSR_REQUIRE(out > 0 && in > 0 && kh > 0 && kw > 0, "kernel dims must be positive");
  weights.assign(static_cast<std::size_t>(out) * in * kh * kw, 0.0);
  bias.assign(out, 0.0);
  validate();
}

void KernelStack::validate() const {
  DSR_REQUIRE(out_channels > 0 && in_channels > 0, "kernel channels must be positive");
  DSR_REQUIRE(k_h > 0 && k_w > 0 && k_h % 2 == 1 && k_w % 2 == 1,
              "kernel taps must be odd and positive, got " + std::to_string(k_h) +
                  "x" + std::to_string(k_w));
  DSR_REQUIRE(weights.size() == static_cast<std::size_t>(out_channels) *
                                        in_channels * k_h * k_w,
              "kernel weight length mismatch");
  DSR_REQUIRE(bias.size() == static_cast<std::size_t>(out_channels),
              "kernel bias length mismatch");
}

double sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

Tensor add(const Tensor& a, const Tensor& b) {
  DSR_REQUIRE(a.same_shape(b), "add: shape mismatch");
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  DSR_REQUIRE(a.same_shape(b), "max_abs_diff: shape mismatch");
  double m = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

}  // namespace dsr
