// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace dsr {
namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

// Source index for every padded coordinate, -1 meaning an implicit zero.
std::vector<int> padding_map(int n, int radius, Padding padding) {
  if (padding == Padding::kValid) {
    std::vector<int> map(n);
    for (int i = 0; i < n; ++i) map[i] = i;
    return map;
  }
  std::vector<int> map(n + 2 * radius);
  for (int i = 0; i < n + 2 * radius; ++i) {
    const int src = i - radius;
    if (src >= 0 && src < n)
      map[i] = src;
    else
      map[i] = padding == Padding::kZero ? -1 : reflect_index(src, n);
  }
  return map;
}

void check_conv_args(const Tensor& input, const KernelStack& kernel, Padding padding) {
  kernel.validate();
  DSR_REQUIRE(input.channels() == kernel.in_channels,
              "conv2d: input has " + std::to_string(input.channels()) +
                  " channels, kernel expects " + std::to_string(kernel.in_channels));
  if (padding == Padding::kValid)
    DSR_REQUIRE(input.height() >= kernel.k_h && input.width() >= kernel.k_w,
                "conv2d: input smaller than kernel support under valid padding");
}

Tensor pad(const Tensor& x, const std::vector<int>& rows, const std::vector<int>& cols) {
  if (rows.size() == static_cast<std::size_t>(x.height()) &&
      cols.size() == static_cast<std::size_t>(x.width()))
    return x;
  Tensor p(static_cast<int>(rows.size()), static_cast<int>(cols.size()), x.channels());
  const int c = x.channels();
  for (int r = 0; r < p.height(); ++r) {
    if (rows[r] < 0) continue;
    for (int q = 0; q < p.width(); ++q) {
      if (cols[q] < 0) continue;
      std::copy_n(x.pixel(rows[r], cols[q]), c, p.pixel(r, q));
    }
  }
  return p;
}

// Weights reordered to [(ky, kx)][o][i] so the inner loop walks contiguous
// input channels.
std::vector<double> reorder_tap_major(const KernelStack& k) {
  const int taps = k.k_h * k.k_w;
  std::vector<double> wr(k.weights.size());
  for (int o = 0; o < k.out_channels; ++o)
    for (int i = 0; i < k.in_channels; ++i)
      for (int t = 0; t < taps; ++t)
        wr[(static_cast<std::size_t>(t) * k.out_channels + o) * k.in_channels + i] =
            k.weights[(static_cast<std::size_t>(o) * k.in_channels + i) * taps + t];
  return wr;
}

double cubic_weight(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

// Sparse 1-D resampling operator: output o reads taps [offset[o], offset[o+1]).
struct AxisResampler {
  std::vector<int> offset;
  std::vector<int> index;
  std::vector<double> weight;
};

AxisResampler make_axis(int in, int out, Ratio f) {
  AxisResampler ax;
  ax.offset.push_back(0);
  const double step = static_cast<double>(f.den) / f.num;  // input px per output px
  const bool down = f.num < f.den;
  const double stretch = down ? step : 1.0;
  const double support = 2.0 * stretch;
  for (int o = 0; o < out; ++o) {
    const double center = (o + 0.5) * step - 0.5;
    const int lo = static_cast<int>(std::floor(center - support)) + 1;
    const int hi = static_cast<int>(std::ceil(center + support)) - 1;
    double total = 0.0;
    const std::size_t first = ax.weight.size();
    for (int j = lo; j <= hi; ++j) {
      const double w = cubic_weight((j - center) / stretch);
      if (w == 0.0) continue;
      ax.index.push_back(std::clamp(j, 0, in - 1));
      ax.weight.push_back(w);
      total += w;
    }
    if (down)
      for (std::size_t t = first; t < ax.weight.size(); ++t) ax.weight[t] /= total;
    ax.offset.push_back(static_cast<int>(ax.weight.size()));
  }
  return ax;
}

int scaled_dim(int n, Ratio f) {
  DSR_REQUIRE(f.num > 0 && f.den > 0, "bicubic_resize: factor must be positive");
  const long long prod = static_cast<long long>(n) * f.num;
  DSR_REQUIRE(prod % f.den == 0, "bicubic_resize: output size " + std::to_string(n) +
                                     "*" + std::to_string(f.num) + "/" +
                                     std::to_string(f.den) + " is not integral");
  return static_cast<int>(prod / f.den);
}

}  // namespace

std::string to_string(Activation a) {
  switch (a.kind) {
    case Activation::Kind::kRelu: return "relu";
    case Activation::Kind::kLeakyRelu: return "leaky_relu(" + std::to_string(a.slope) + ")";
    case Activation::Kind::kIdentity: return "identity";
  }
  return "identity";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu();
  if (name == "identity") return Activation::identity();
  if (name.rfind("leaky_relu(", 0) == 0 && name.back() == ')') {
    const std::string arg = name.substr(11, name.size() - 12);
    std::size_t used = 0;
    double slope = 0.0;
    try {
      slope = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == arg.size() && used > 0) return Activation::leaky_relu(slope);
  }
  throw ConfigError("unknown activation '" + name + "'");
}

Tensor conv2d(const Tensor& input, const KernelStack& kernel, Padding padding) {
  check_conv_args(input, kernel, padding);
  const auto rows = padding_map(input.height(), kernel.k_h / 2, padding);
  const auto cols = padding_map(input.width(), kernel.k_w / 2, padding);
  const Tensor p = pad(input, rows, cols);
  const int oh = p.height() - kernel.k_h + 1;
  const int ow = p.width() - kernel.k_w + 1;
  const int cin = kernel.in_channels;
  const int cout = kernel.out_channels;
  const auto wr = reorder_tap_major(kernel);
  Tensor out(oh, ow, cout);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double* acc = out.pixel(y, x);
      for (int o = 0; o < cout; ++o) acc[o] = kernel.bias[o];
      for (int ky = 0; ky < kernel.k_h; ++ky) {
        for (int kx = 0; kx < kernel.k_w; ++kx) {
          const double* src = p.pixel(y + ky, x + kx);
          const double* w =
              wr.data() + static_cast<std::size_t>(ky * kernel.k_w + kx) * cout * cin;
          for (int o = 0; o < cout; ++o) {
            double s = 0.0;
            for (int i = 0; i < cin; ++i) s += w[o * cin + i] * src[i];
            acc[o] += s;
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const KernelStack& kernel,
                            Padding padding, const Tensor& grad_out, bool want_input) {
  check_conv_args(input, kernel, padding);
  const auto rows = padding_map(input.height(), kernel.k_h / 2, padding);
  const auto cols = padding_map(input.width(), kernel.k_w / 2, padding);
  const Tensor p = pad(input, rows, cols);
  const int oh = p.height() - kernel.k_h + 1;
  const int ow = p.width() - kernel.k_w + 1;
  DSR_REQUIRE(grad_out.height() == oh && grad_out.width() == ow &&
                  grad_out.channels() == kernel.out_channels,
              "conv2d_backward: upstream gradient shape mismatch");
  const int cin = kernel.in_channels;
  const int cout = kernel.out_channels;
  const int taps = kernel.k_h * kernel.k_w;

  // Weights as [(ky,kx)][i][o] for the input adjoint.
  std::vector<double> wt(kernel.weights.size());
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < cin; ++i)
      for (int t = 0; t < taps; ++t)
        wt[(static_cast<std::size_t>(t) * cin + i) * cout + o] =
            kernel.weights[(static_cast<std::size_t>(o) * cin + i) * taps + t];

  std::vector<double> dwr(kernel.weights.size(), 0.0);  // [(ky,kx)][o][i]
  Conv2dGrads g;
  g.kernel = KernelStack(cout, cin, kernel.k_h, kernel.k_w);
  Tensor dp;
  if (want_input) dp = Tensor(p.height(), p.width(), cin);

  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double* go = grad_out.pixel(y, x);
      for (int o = 0; o < cout; ++o) g.kernel.bias[o] += go[o];
      for (int ky = 0; ky < kernel.k_h; ++ky) {
        for (int kx = 0; kx < kernel.k_w; ++kx) {
          const int t = ky * kernel.k_w + kx;
          const double* src = p.pixel(y + ky, x + kx);
          double* dw = dwr.data() + static_cast<std::size_t>(t) * cout * cin;
          for (int o = 0; o < cout; ++o) {
            const double gv = go[o];
            if (gv == 0.0) continue;
            double* row = dw + o * cin;
            for (int i = 0; i < cin; ++i) row[i] += gv * src[i];
          }
          if (want_input) {
            double* dsrc = dp.pixel(y + ky, x + kx);
            const double* w = wt.data() + static_cast<std::size_t>(t) * cin * cout;
            for (int i = 0; i < cin; ++i) {
              double s = 0.0;
              for (int o = 0; o < cout; ++o) s += w[i * cout + o] * go[o];
              dsrc[i] += s;
            }
          }
        }
      }
    }
  }
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < cin; ++i)
      for (int t = 0; t < taps; ++t)
        g.kernel.weights[(static_cast<std::size_t>(o) * cin + i) * taps + t] =
            dwr[(static_cast<std::size_t>(t) * cout + o) * cin + i];

  if (want_input) {
    if (padding == Padding::kValid) {
      g.input = std::move(dp);
    } else {
      g.input = Tensor(input.height(), input.width(), cin);
      for (int r = 0; r < dp.height(); ++r) {
        if (rows[r] < 0) continue;
        for (int q = 0; q < dp.width(); ++q) {
          if (cols[q] < 0) continue;
          const double* s = dp.pixel(r, q);
          double* d = g.input.pixel(rows[r], cols[q]);
          for (int i = 0; i < cin; ++i) d[i] += s[i];
        }
      }
    }
  }
  return g;
}

Tensor activate(const Tensor& x, Activation a) {
  if (a.kind == Activation::Kind::kIdentity) return x;
  Tensor out = x;
  if (a.kind == Activation::Kind::kRelu) {
    for (double& v : out.data())
      if (!(v > 0.0)) v = 0.0;
  } else {
    for (double& v : out.data())
      if (v < 0.0) v *= a.slope;
  }
  return out;
}

Tensor activate_backward(const Tensor& pre, Activation a, const Tensor& grad_out) {
  DSR_REQUIRE(pre.same_shape(grad_out), "activation backward: shape mismatch");
  if (a.kind == Activation::Kind::kIdentity) return grad_out;
  const double slope = a.kind == Activation::Kind::kRelu ? 0.0 : a.slope;
  Tensor g = grad_out;
  auto pd = pre.data();
  auto gd = g.data();
  for (std::size_t i = 0; i < gd.size(); ++i)
    if (!(pd[i] > 0.0)) gd[i] *= slope;
  return g;
}

Tensor bicubic_resize(const Tensor& x, Ratio factor) {
  const int oh = scaled_dim(x.height(), factor);
  const int ow = scaled_dim(x.width(), factor);
  if (factor.num == factor.den) return x;
  const int c = x.channels();
  const AxisResampler ax_w = make_axis(x.width(), ow, factor);
  const AxisResampler ax_h = make_axis(x.height(), oh, factor);
  Tensor tmp(x.height(), ow, c);
  for (int r = 0; r < x.height(); ++r)
    for (int q = 0; q < ow; ++q) {
      double* d = tmp.pixel(r, q);
      for (int t = ax_w.offset[q]; t < ax_w.offset[q + 1]; ++t) {
        const double* s = x.pixel(r, ax_w.index[t]);
        const double w = ax_w.weight[t];
        for (int ch = 0; ch < c; ++ch) d[ch] += w * s[ch];
      }
    }
  Tensor out(oh, ow, c);
  for (int r = 0; r < oh; ++r)
    for (int t = ax_h.offset[r]; t < ax_h.offset[r + 1]; ++t) {
      const double w = ax_h.weight[t];
      for (int q = 0; q < ow; ++q) {
        const double* s = tmp.pixel(ax_h.index[t], q);
        double* d = out.pixel(r, q);
        for (int ch = 0; ch < c; ++ch) d[ch] += w * s[ch];
      }
    }
  return out;
}

Tensor bicubic_resize_backward(int in_height, int in_width, Ratio factor,
                               const Tensor& grad_out) {
  const int oh = scaled_dim(in_height, factor);
  const int ow = scaled_dim(in_width, factor);
  DSR_REQUIRE(grad_out.height() == oh && grad_out.width() == ow,
              "bicubic_resize_backward: upstream gradient shape mismatch");
  if (factor.num == factor.den) return grad_out;
  const int c = grad_out.channels();
  const AxisResampler ax_w = make_axis(in_width, ow, factor);
  const AxisResampler ax_h = make_axis(in_height, oh, factor);
  Tensor tmp(in_height, ow, c);
  for (int r = 0; r < oh; ++r)
    for (int t = ax_h.offset[r]; t < ax_h.offset[r + 1]; ++t) {
      const double w = ax_h.weight[t];
      for (int q = 0; q < ow; ++q) {
        const double* s = grad_out.pixel(r, q);
        double* d = tmp.pixel(ax_h.index[t], q);
        for (int ch = 0; ch < c; ++ch) d[ch] += w * s[ch];
      }
    }
  Tensor g(in_height, in_width, c);
  for (int r = 0; r < in_height; ++r)
    for (int q = 0; q < ow; ++q) {
      const double* s = tmp.pixel(r, q);
      for (int t = ax_w.offset[q]; t < ax_w.offset[q + 1]; ++t) {
        double* d = g.pixel(r, ax_w.index[t]);
        const double w = ax_w.weight[t];
        for (int ch = 0; ch < c; ++ch) d[ch] += w * s[ch];
      }
    }
  return g;
}

Tensor pixel_shuffle(const Tensor& x, int n) {
  DSR_REQUIRE(n > 0, "pixel_shuffle: n must be positive");
  DSR_REQUIRE(x.channels() == n * n, "pixel_shuffle: channels " +
                                         std::to_string(x.channels()) + " != n^2 = " +
                                         std::to_string(n * n));
  Tensor out(x.height() * n, x.width() * n, 1);
  for (int r = 0; r < x.height(); ++r)
    for (int q = 0; q < x.width(); ++q) {
      const double* s = x.pixel(r, q);
      for (int c = 0; c < n * n; ++c) out(n * r + c / n, n * q + c % n, 0) = s[c];
    }
  return out;
}

Tensor pixel_unshuffle(const Tensor& x, int n) {
  DSR_REQUIRE(n > 0, "pixel_unshuffle: n must be positive");
  DSR_REQUIRE(x.channels() == 1, "pixel_unshuffle: expects a single channel");
  DSR_REQUIRE(x.height() % n == 0 && x.width() % n == 0,
              "pixel_unshuffle: dims not divisible by " + std::to_string(n));
  Tensor out(x.height() / n, x.width() / n, n * n);
  for (int r = 0; r < out.height(); ++r)
    for (int q = 0; q < out.width(); ++q) {
      double* d = out.pixel(r, q);
      for (int c = 0; c < n * n; ++c) d[c] = x(n * r + c / n, n * q + c % n, 0);
    }
  return out;
}

Tensor pixel_shuffle_backward(const Tensor& grad_out, int n) {
  return pixel_unshuffle(grad_out, n);
}

Tensor decimate(const Tensor& x, int s, Phase phase) {
  DSR_REQUIRE(s > 0, "decimate: factor must be positive");
  DSR_REQUIRE(x.height() % s == 0 && x.width() % s == 0,
              "decimate: dims " + std::to_string(x.height()) + "x" +
                  std::to_string(x.width()) + " not divisible by " + std::to_string(s));
  DSR_REQUIRE(phase.row >= 0 && phase.row < s && phase.col >= 0 && phase.col < s,
              "decimate: phase out of range");
  Tensor out(x.height() / s, x.width() / s, x.channels());
  const int c = x.channels();
  for (int i = 0; i < out.height(); ++i)
    for (int j = 0; j < out.width(); ++j)
      std::copy_n(x.pixel(s * i + phase.row, s * j + phase.col), c, out.pixel(i, j));
  return out;
}

Tensor decimate_backward(int in_height, int in_width, int s, Phase phase,
                         const Tensor& grad_out) {
  DSR_REQUIRE(in_height % s == 0 && in_width % s == 0 &&
                  grad_out.height() == in_height / s && grad_out.width() == in_width / s,
              "decimate_backward: shape mismatch");
  Tensor g(in_height, in_width, grad_out.channels());
  const int c = grad_out.channels();
  for (int i = 0; i < grad_out.height(); ++i)
    for (int j = 0; j < grad_out.width(); ++j)
      std::copy_n(grad_out.pixel(i, j), c, g.pixel(s * i + phase.row, s * j + phase.col));
  return g;
}

// --- recorded op instances ---

Tensor Conv2dOp::forward(const Tensor& input, const KernelStack& kernel) {
  Tensor out = conv2d(input, kernel, padding_);
  input_ = input;
  kernel_ = kernel;
  return out;
}

Conv2dGrads Conv2dOp::backward(const Tensor& grad_out, bool want_input) const {
  DSR_REQUIRE(input_.has_value(), "conv2d adjoint requested before forward evaluation");
  return conv2d_backward(*input_, *kernel_, padding_, grad_out, want_input);
}

const Tensor& Conv2dOp::input() const {
  DSR_REQUIRE(input_.has_value(), "conv2d input requested before forward evaluation");
  return *input_;
}

Tensor ActivationOp::forward(const Tensor& x) {
  pre_ = x;
  return activate(x, act_);
}

Tensor ActivationOp::backward(const Tensor& grad_out) const {
  DSR_REQUIRE(pre_.has_value(), "activation adjoint requested before forward evaluation");
  return activate_backward(*pre_, act_, grad_out);
}

Tensor BicubicOp::forward(const Tensor& x) {
  Tensor out = bicubic_resize(x, factor_);
  in_dims_ = {x.height(), x.width()};
  return out;
}

Tensor BicubicOp::backward(const Tensor& grad_out) const {
  DSR_REQUIRE(in_dims_.has_value(), "bicubic adjoint requested before forward evaluation");
  return bicubic_resize_backward(in_dims_->first, in_dims_->second, factor_, grad_out);
}

Tensor PixelShuffleOp::forward(const Tensor& x) {
  Tensor out = pixel_shuffle(x, n_);
  evaluated_ = true;
  return out;
}

Tensor PixelShuffleOp::backward(const Tensor& grad_out) const {
  DSR_REQUIRE(evaluated_, "pixel_shuffle adjoint requested before forward evaluation");
  return pixel_shuffle_backward(grad_out, n_);
}

Tensor DecimateOp::forward(const Tensor& x) {
  Tensor out = decimate(x, s_, phase_);
  in_dims_ = {x.height(), x.width()};
  return out;
}

Tensor DecimateOp::backward(const Tensor& grad_out) const {
  DSR_REQUIRE(in_dims_.has_value(), "decimate adjoint requested before forward evaluation");
  return decimate_backward(in_dims_->first, in_dims_->second, s_, phase_, grad_out);
}

}  // namespace dsr
