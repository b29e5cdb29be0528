// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "dsr/ops.hpp"
#include "test_util.hpp"

using namespace dsr;
using dsr::test::dot;
using dsr::test::fd_max_rel_error;
using dsr::test::random_kernel;
using dsr::test::random_tensor;

namespace {

// Independent cross-correlation: four nested loops over (o, r, q, i, kr, kq)
// with explicit boundary handling.
Tensor conv_oracle(const Tensor& x, const KernelStack& k, Padding p) {
  const int rh = k.k_h / 2, rw = k.k_w / 2;
  const int oh = p == Padding::kValid ? x.height() - 2 * rh : x.height();
  const int ow = p == Padding::kValid ? x.width() - 2 * rw : x.width();
  const int off_r = p == Padding::kValid ? 0 : -rh;
  const int off_q = p == Padding::kValid ? 0 : -rw;
  auto mirror = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
  Tensor out(oh, ow, k.out_channels);
  for (int o = 0; o < k.out_channels; ++o)
    for (int r = 0; r < oh; ++r)
      for (int q = 0; q < ow; ++q) {
        double acc = k.bias[o];
        for (int i = 0; i < k.in_channels; ++i)
          for (int kr = 0; kr < k.k_h; ++kr)
            for (int kq = 0; kq < k.k_w; ++kq) {
              int sr = r + kr + off_r, sq = q + kq + off_q;
              if (p == Padding::kZero &&
                  (sr < 0 || sq < 0 || sr >= x.height() || sq >= x.width()))
                continue;
              if (p == Padding::kReflect) {
                sr = mirror(sr, x.height());
                sq = mirror(sq, x.width());
              }
              acc += k.at(o, i, kr, kq) * x(sr, sq, i);
            }
        out(r, q, o) = acc;
      }
  return out;
}

Tensor ramp(int h, int w) {
  Tensor t(h, w, 1);
  for (int r = 0; r < h; ++r)
    for (int q = 0; q < w; ++q) t(r, q, 0) = r * w + q;
  return t;
}

}  // namespace

TEST_CASE("conv2d: delta kernel is the identity") {
  Rng rng(1);
  const Tensor x = random_tensor(rng, 7, 5, 1);
  KernelStack k(1, 1, 3, 3);
  k.at(0, 0, 1, 1) = 1.0;
  for (Padding p : {Padding::kReflect, Padding::kZero}) CHECK(conv2d(x, k, p) == x);
}

TEST_CASE("conv2d: box filter preserves a constant under reflect padding") {
  const Tensor x(6, 6, 1, 0.37);
  KernelStack k(1, 1, 3, 3);
  for (double& v : k.weights) v = 1.0 / 9.0;
  const Tensor y = conv2d(x, k, Padding::kReflect);
  for (double v : y.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("conv2d: 4x4 ramp, distinct taps, valid padding matches nested loops") {
  const Tensor x = ramp(4, 4);
  KernelStack k(1, 1, 3, 3);
  for (int i = 0; i < 9; ++i) k.weights[i] = 0.1 * (i + 1) - 0.35;
  k.bias[0] = 0.25;
  const Tensor y = conv2d(x, k, Padding::kValid);
  REQUIRE(y.height() == 2);
  REQUIRE(y.width() == 2);
  // Hand evaluation of the top-left output: sum_t w_t * x_t + b.
  double top_left = k.bias[0];
  for (int r = 0; r < 3; ++r)
    for (int q = 0; q < 3; ++q) top_left += k.at(0, 0, r, q) * (r * 4 + q);
  CHECK(std::abs(y(0, 0, 0) - top_left) < 1e-12);
  CHECK(max_abs_diff(y, conv_oracle(x, k, Padding::kValid)) < 1e-12);
}

TEST_CASE("conv2d: multi-channel output matches the oracle for every padding") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Tensor x = random_tensor(rng, 6, 7, 3);
    const KernelStack k = random_kernel(rng, 4, 3, 3, 5);
    for (Padding p : {Padding::kReflect, Padding::kZero, Padding::kValid})
      CHECK(max_abs_diff(conv2d(x, k, p), conv_oracle(x, k, p)) < 1e-12);
  }
}

TEST_CASE("conv2d: contract violations") {
  const Tensor x(5, 5, 2);
  CHECK_THROWS_AS(conv2d(x, KernelStack(1, 1, 3, 3), Padding::kReflect), ContractViolation);
  CHECK_THROWS_AS(conv2d(x, KernelStack(1, 2, 2, 3), Padding::kReflect), ContractViolation);
  CHECK_THROWS_AS(conv2d(Tensor(2, 2, 1), KernelStack(1, 1, 3, 3), Padding::kValid),
                  ContractViolation);
}

TEST_CASE("conv2d: linear in the input when the bias is zero") {
  Rng rng(11);
  const Tensor x = random_tensor(rng, 8, 8, 2);
  const Tensor y = random_tensor(rng, 8, 8, 2);
  KernelStack k = random_kernel(rng, 3, 2, 3, 3);
  std::fill(k.bias.begin(), k.bias.end(), 0.0);
  const double a = 1.7, b = -0.6;
  for (Padding p : {Padding::kReflect, Padding::kZero, Padding::kValid}) {
    const Tensor lhs = conv2d(add(scale(x, a), scale(y, b)), k, p);
    const Tensor rhs = add(scale(conv2d(x, k, p), a), scale(conv2d(y, k, p), b));
    CHECK(max_abs_diff(lhs, rhs) < 1e-10);
  }
}

TEST_CASE("activation definitions") {
  const Tensor neg(2, 3, 1, -0.5);
  const Tensor rectified = activate(neg, Activation::relu());
  for (double v : rectified.data()) CHECK(v == 0.0);

  Rng rng(3);
  const Tensor x = random_tensor(rng, 3, 3, 2);
  CHECK(activate(x, Activation::identity()) == x);

  const Tensor pair(1, 2, 1, std::vector<double>{-2.0, 3.0});
  const Tensor y = activate(pair, Activation::leaky_relu(0.1));
  CHECK(y(0, 0, 0) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(y(0, 1, 0) == 3.0);
}

TEST_CASE("bicubic: constants, factor 1 and size contract") {
  const Tensor c(5, 3, 2, 0.625);
  const Tensor up = bicubic_resize(c, {4, 1});
  CHECK(up.height() == 20);
  CHECK(up.width() == 12);
  for (double v : up.data()) CHECK(std::abs(v - 0.625) < 1e-12);

  Rng rng(5);
  const Tensor x = random_tensor(rng, 6, 4, 1);
  CHECK(bicubic_resize(x, {1, 1}) == x);
  CHECK(bicubic_resize(x, {3, 3}) == x);
  CHECK_THROWS_AS(bicubic_resize(x, {1, 4}), ContractViolation);
}

TEST_CASE("bicubic: a linear ramp row stays on its line in the interior") {
  const int n = 16;
  Tensor row(1, n, 1);
  for (int q = 0; q < n; ++q) row(0, q, 0) = 0.2 + 0.05 * q;
  const Tensor up = bicubic_resize(row, {2, 1});
  REQUIRE(up.width() == 2 * n);
  // Half-pixel centers: output j samples source coordinate (j + 0.5) / 2 - 0.5.
  // Interior = all four taps inside the source row.
  for (int j = 0; j < 2 * n; ++j) {
    const double src = (j + 0.5) / 2.0 - 0.5;
    if (src < 1.0 || src > n - 2.0) continue;
    CHECK(std::abs(up(0, j, 0) - (0.2 + 0.05 * src)) < 1e-9);
  }
}

TEST_CASE("bicubic: a plane is reproduced in the interior at factor 4") {
  const int h = 8, w = 9;
  Tensor x(h, w, 1);
  for (int r = 0; r < h; ++r)
    for (int q = 0; q < w; ++q) x(r, q, 0) = 0.1 + 0.03 * r - 0.02 * q;
  const Tensor up = bicubic_resize(x, {4, 1});
  for (int r = 0; r < 4 * h; ++r)
    for (int q = 0; q < 4 * w; ++q) {
      const double sr = (r + 0.5) / 4.0 - 0.5, sq = (q + 0.5) / 4.0 - 0.5;
      if (sr < 1.0 || sr > h - 2.0 || sq < 1.0 || sq > w - 2.0) continue;
      CHECK(std::abs(up(r, q, 0) - (0.1 + 0.03 * sr - 0.02 * sq)) < 1e-9);
    }
}

TEST_CASE("pixel_shuffle: declared sub-block order") {
  const Tensor x(1, 1, 4, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  const Tensor y = pixel_shuffle(x, 2);
  REQUIRE(y.height() == 2);
  REQUIRE(y.width() == 2);
  CHECK(y(0, 0, 0) == 1.0);
  CHECK(y(0, 1, 0) == 2.0);
  CHECK(y(1, 0, 0) == 3.0);
  CHECK(y(1, 1, 0) == 4.0);
  CHECK(pixel_unshuffle(y, 2) == x);

  const Tensor shuffled = pixel_shuffle(Tensor(2, 3, 9, 0.4), 3);
  for (double v : shuffled.data()) CHECK(v == 0.4);
  CHECK_THROWS_AS(pixel_shuffle(Tensor(2, 2, 5), 2), ContractViolation);
  CHECK_THROWS_AS(pixel_unshuffle(Tensor(5, 4, 1), 2), ContractViolation);
}

TEST_CASE("pixel_shuffle: roundtrips") {
  Rng rng(9);
  const Tensor a = random_tensor(rng, 3, 5, 9);
  CHECK(pixel_unshuffle(pixel_shuffle(a, 3), 3) == a);
  const Tensor b = random_tensor(rng, 6, 9, 1);
  CHECK(pixel_shuffle(pixel_unshuffle(b, 3), 3) == b);
}

TEST_CASE("pixel_shuffle: index map is a bijection for n = 2, 3, 4") {
  for (int n = 2; n <= 4; ++n) {
    const int h = 2, w = 3;
    Tensor x(h, w, n * n);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = static_cast<double>(i);
    const Tensor y = pixel_shuffle(x, n);
    std::vector<int> seen(x.size(), 0);
    for (int r = 0; r < h; ++r)
      for (int q = 0; q < w; ++q)
        for (int c = 0; c < n * n; ++c) {
          const double v = y(n * r + c / n, n * q + c % n, 0);
          CHECK(v == x(r, q, c));
          ++seen[static_cast<std::size_t>(v)];
        }
    for (int s : seen) CHECK(s == 1);
    CHECK(pixel_unshuffle(y, n) == x);
  }
}

TEST_CASE("decimate: definition and composition") {
  Rng rng(2);
  const Tensor x = random_tensor(rng, 8, 8, 2);
  CHECK(decimate(x, 1) == x);

  const Tensor r = ramp(4, 4);
  const Tensor d = decimate(r, 2);
  CHECK(d(0, 0, 0) == 0.0);
  CHECK(d(0, 1, 0) == 2.0);
  CHECK(d(1, 0, 0) == 8.0);
  CHECK(d(1, 1, 0) == 10.0);
  const Tensor shifted = decimate(r, 2, {1, 0});
  CHECK(shifted(0, 0, 0) == 4.0);
  CHECK(shifted(1, 1, 0) == 14.0);

  CHECK(decimate(decimate(x, 2), 2) == decimate(x, 4));
  CHECK_THROWS_AS(decimate(Tensor(5, 4, 1), 2), ContractViolation);
  CHECK_THROWS_AS(decimate(x, 2, {2, 0}), ContractViolation);
}

TEST_CASE("adjoint: closed forms") {
  Rng rng(4);
  PixelShuffleOp ps(2);
  const Tensor x = random_tensor(rng, 3, 3, 4);
  const Tensor y = ps.forward(x);
  const Tensor g = ps.backward(Tensor(y.height(), y.width(), 1, 1.0));
  REQUIRE(g.same_shape(x));
  for (double v : g.data()) CHECK(v == 1.0);

  Conv2dOp conv(Padding::kValid);
  const Tensor in = random_tensor(rng, 6, 5, 2);
  const Tensor out = conv.forward(in, random_kernel(rng, 3, 2, 3, 3));
  const Conv2dGrads cg = conv.backward(Tensor(out.height(), out.width(), 3, 1.0));
  for (double b : cg.kernel.bias) CHECK(b == 4.0 * 3.0);
}

TEST_CASE("adjoint before forward is rejected") {
  CHECK_THROWS_AS(Conv2dOp().backward(Tensor(2, 2, 1)), ContractViolation);
  CHECK_THROWS_AS(ActivationOp(Activation::relu()).backward(Tensor(2, 2, 1)),
                  ContractViolation);
  CHECK_THROWS_AS(BicubicOp({2, 1}).backward(Tensor(4, 4, 1)), ContractViolation);
  CHECK_THROWS_AS(PixelShuffleOp(2).backward(Tensor(4, 4, 1)), ContractViolation);
  CHECK_THROWS_AS(DecimateOp(2, {}).backward(Tensor(2, 2, 1)), ContractViolation);
}

// Every primitive against central differences (step 1e-5) of
// L(x) = <upstream, op(x)> on random 6x6 inputs over ten seeds.
TEST_CASE("adjoint: every primitive matches central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    Rng rng(100 + seed);
    Tensor x = random_tensor(rng, 6, 6, 2);

    for (Padding p : {Padding::kReflect, Padding::kZero, Padding::kValid}) {
      KernelStack k = random_kernel(rng, 3, 2, 3, 3);
      const Tensor up = random_tensor(rng, p == Padding::kValid ? 4 : 6,
                                      p == Padding::kValid ? 4 : 6, 3);
      Conv2dOp op(p);
      op.forward(x, k);
      const Conv2dGrads g = op.backward(up);
      auto f = [&] { return dot(up, conv2d(x, k, p)); };
      CHECK(fd_max_rel_error(x.data(), g.input.data(), f) < 1e-4);
      CHECK(fd_max_rel_error(k.weights, g.kernel.weights, f) < 1e-4);
      CHECK(fd_max_rel_error(k.bias, g.kernel.bias, f) < 1e-4);
    }

    for (Activation a : {Activation::relu(), Activation::leaky_relu(0.1), Activation::identity()}) {
      const Tensor up = random_tensor(rng, 6, 6, 2);
      ActivationOp op(a);
      op.forward(x);
      const Tensor g = op.backward(up);
      CHECK(fd_max_rel_error(x.data(), g.data(), [&] { return dot(up, activate(x, a)); }) < 1e-4);
    }

    for (Ratio r : {Ratio{2, 1}, Ratio{1, 2}, Ratio{3, 2}}) {
      const Tensor probe = bicubic_resize(x, r);
      const Tensor up = random_tensor(rng, probe.height(), probe.width(), 2);
      BicubicOp op(r);
      op.forward(x);
      const Tensor g = op.backward(up);
      CHECK(fd_max_rel_error(x.data(), g.data(), [&] { return dot(up, bicubic_resize(x, r)); }) <
            1e-4);
    }

    {
      Tensor s = random_tensor(rng, 6, 6, 4);
      const Tensor up = random_tensor(rng, 12, 12, 1);
      PixelShuffleOp op(2);
      op.forward(s);
      const Tensor g = op.backward(up);
      CHECK(fd_max_rel_error(s.data(), g.data(), [&] { return dot(up, pixel_shuffle(s, 2)); }) <
            1e-4);
    }

    {
      const Tensor up = random_tensor(rng, 3, 3, 2);
      DecimateOp op(2, {1, 0});
      op.forward(x);
      const Tensor g = op.backward(up);
      CHECK(fd_max_rel_error(x.data(), g.data(),
                             [&] { return dot(up, decimate(x, 2, {1, 0})); }) < 1e-4);
    }
  }
}

TEST_CASE("public operations stay finite on finite inputs") {
  Rng rng(77);
  const Tensor x = random_tensor(rng, 6, 6, 4, -1e3, 1e3);
  CHECK(conv2d(x, random_kernel(rng, 2, 4, 3, 3), Padding::kReflect).all_finite());
  CHECK(activate(x, Activation::leaky_relu(0.2)).all_finite());
  CHECK(bicubic_resize(x, {4, 1}).all_finite());
  CHECK(bicubic_resize(x, {1, 3}).all_finite());
  CHECK(pixel_shuffle(x, 2).all_finite());
  CHECK(decimate(x, 3).all_finite());
}
