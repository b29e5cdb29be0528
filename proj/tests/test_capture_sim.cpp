// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "doctest.h"
#include "dsr/capture_sim.hpp"
#include "dsr/ops.hpp"
#include "test_util.hpp"

using namespace dsr;
using dsr::test::random_tensor;

namespace {

// Isotropic Gaussian sampled on the integer grid of radius ceil(3 sigma),
// normalized. Written from the definition, not from stretch_psf.
std::vector<double> gaussian_taps(double sigma, int& side) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  side = 2 * radius + 1;
  std::vector<double> taps(static_cast<std::size_t>(side) * side);
  double total = 0.0;
  for (int r = 0; r < side; ++r)
    for (int q = 0; q < side; ++q) {
      const double d2 = (r - radius) * (r - radius) + (q - radius) * (q - radius);
      taps[static_cast<std::size_t>(r) * side + q] = std::exp(-d2 / (2.0 * sigma * sigma));
      total += taps[static_cast<std::size_t>(r) * side + q];
    }
  for (double& t : taps) t /= total;
  return taps;
}

// Blur every valid position with a direct nested loop, then keep (S i, S j).
Tensor reference_capture(const Tensor& hr, const std::vector<double>& taps, int side, int s) {
  const int vh = hr.height() - side + 1, vw = hr.width() - side + 1;
  Tensor blurred(vh, vw, 1);
  for (int r = 0; r < vh; ++r)
    for (int q = 0; q < vw; ++q) {
      double acc = 0.0;
      for (int u = 0; u < side; ++u)
        for (int v = 0; v < side; ++v)
          acc += taps[static_cast<std::size_t>(u) * side + v] * hr(r + u, q + v, 0);
      blurred(r, q, 0) = acc;
    }
  Tensor out(vh / s, vw / s, 1);
  for (int i = 0; i < out.height(); ++i)
    for (int j = 0; j < out.width(); ++j) out(i, j, 0) = std::clamp(blurred(s * i, s * j, 0), 0.0, 1.0);
  return out;
}

Tensor checkerboard(int n, int cell) {
  Tensor t(n, n, 1);
  for (int r = 0; r < n; ++r)
    for (int q = 0; q < n; ++q) t(r, q, 0) = ((r / cell + q / cell) % 2) ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST_CASE("sample_psf: isotropic when anisotropy_max = 1, deterministic per seed") {
  PsfSamplerConfig cfg;
  cfg.anisotropy_max = 1.0;
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Psf p = sample_psf(rng, cfg);
    CHECK(p.sigma_major == p.sigma_minor);
  }
  cfg.anisotropy_max = 1.5;
  Rng a(42), b(42);
  for (int i = 0; i < 5; ++i) {
    const Psf p = sample_psf(a, cfg), q = sample_psf(b, cfg);
    CHECK(p.sigma_major == q.sigma_major);
    CHECK(p.sigma_minor == q.sigma_minor);
    CHECK(p.theta == q.theta);
  }
}

TEST_CASE("sample_psf: draws respect the configured bounds") {
  PsfSamplerConfig cfg{0.5, 1.5, 2.0, 0};
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const Psf p = sample_psf(rng, cfg);
    CHECK(p.sigma_major >= 0.5);
    CHECK(p.sigma_major < 1.5);
    CHECK(p.sigma_minor <= p.sigma_major);
    CHECK(p.sigma_minor >= p.sigma_major / 2.0);
    CHECK(p.theta >= 0.0);
    CHECK(p.theta < std::numbers::pi);
  }
  CHECK_THROWS_AS(sample_psf(rng, PsfSamplerConfig{0.0, 1.0, 1.0, 0}), ContractViolation);
  CHECK_THROWS_AS(sample_psf(rng, PsfSamplerConfig{1.0, 0.5, 1.0, 0}), ContractViolation);
}

TEST_CASE("sample_psf: sigma_major histogram passes chi-square at the 1% level") {
  PsfSamplerConfig cfg{0.4, 0.9, 1.5, 0};
  Rng rng(2026);
  constexpr int kSamples = 1000, kBins = 10;
  std::array<int, kBins> counts{};
  for (int i = 0; i < kSamples; ++i) {
    const double u = (sample_psf(rng, cfg).sigma_major - cfg.sigma_lo) / (cfg.sigma_hi - cfg.sigma_lo);
    ++counts[std::min(kBins - 1, static_cast<int>(u * kBins))];
  }
  const double expected = static_cast<double>(kSamples) / kBins;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99th percentile of chi-square with 9 degrees of freedom.
  CHECK(chi2 < 21.666);
}

TEST_CASE("stretch_psf: S = 1 equals direct sampling of the Gaussian") {
  int side = 0;
  const std::vector<double> taps = gaussian_taps(0.8, side);
  const KernelStack k = stretch_psf(Psf::gaussian(0.8, 0.8, 0.0), 1);
  REQUIRE(k.k_h == side);
  REQUIRE(k.k_w == side);
  for (std::size_t i = 0; i < taps.size(); ++i) CHECK(std::abs(k.weights[i] - taps[i]) < 1e-15);
}

TEST_CASE("stretch_psf: orientation puts the major axis along theta") {
  // theta = pi/2: major axis along rows.
  const KernelStack k = stretch_psf(Psf::gaussian(1.0, 0.5, std::numbers::pi / 2), 1);
  const int c = k.k_h / 2;
  CHECK(k.at(0, 0, c + 1, c) > k.at(0, 0, c, c + 1));
  const double expected_ratio = std::exp(-0.5 * (1.0 - 4.0));  // rows: 1/1^2, cols: 1/0.5^2
  CHECK(k.at(0, 0, c + 1, c) / k.at(0, 0, c, c + 1) == doctest::Approx(expected_ratio));
}

TEST_CASE("stretch_psf: sigma 1 at S = 2 equals sigma 2 at S = 1") {
  const KernelStack a = stretch_psf(Psf::gaussian(1.0, 0.7, 0.3), 2);
  const KernelStack b = stretch_psf(Psf::gaussian(2.0, 1.4, 0.3), 1);
  CHECK(a == b);
  CHECK(a.k_h == 2 * 6 + 1);
}

TEST_CASE("stretch_psf: every kernel has unit mass") {
  const std::vector<double> tab{0.05, 0.1, 0.05, 0.1, 0.4, 0.1, 0.05, 0.1, 0.05};
  for (int s = 1; s <= 8; ++s) {
    for (const Psf& p : {Psf::gaussian(0.6, 0.4, 1.0), Psf::tabulated(3, tab), Psf::delta()}) {
      const KernelStack k = stretch_psf(p, s);
      double total = 0.0;
      for (double v : k.weights) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
      CHECK(k.k_h % 2 == 1);
    }
  }
  CHECK_THROWS_AS(Psf::tabulated(3, std::vector<double>(9, 0.2)), ContractViolation);
  CHECK_THROWS_AS(Psf::tabulated(2, std::vector<double>(4, 0.25)), ContractViolation);
}

TEST_CASE("simulate_capture: delta PSF is pure decimation") {
  Rng rng(5);
  const Tensor hr = random_tensor(rng, 9, 7, 1, 0.0, 1.0);
  CaptureConfig cfg;
  cfg.S = 2;
  const Tensor out = simulate_capture(hr, Psf::delta(), cfg);
  REQUIRE(out.height() == 4);
  REQUIRE(out.width() == 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) CHECK(out(i, j, 0) == hr(2 * i, 2 * j, 0));
}

TEST_CASE("simulate_capture: unit mass preserves constants") {
  const std::vector<double> tab{0.0, 0.2, 0.0, 0.2, 0.2, 0.2, 0.0, 0.2, 0.0};
  for (const Psf& p : {Psf::gaussian(0.9, 0.5, 0.4), Psf::gaussian(0.4, 0.4, 0.0),
                       Psf::tabulated(3, tab)})
    for (int s : {1, 2, 3, 8}) {
      const Tensor hr(70, 66, 1, 0.4321);
      CaptureConfig cfg;
      cfg.S = s;
      const Tensor out = simulate_capture(hr, p, cfg);
      for (double v : out.data()) CHECK(std::abs(v - 0.4321) < 1e-9);
    }
}

TEST_CASE("simulate_capture: checkerboard matches blur-then-subsample reference") {
  const Tensor hr = checkerboard(64, 3);
  int side = 0;
  const std::vector<double> taps = gaussian_taps(2 * 1.2, side);
  CaptureConfig cfg;
  cfg.S = 2;
  const Tensor fused = simulate_capture(hr, Psf::gaussian(1.2, 1.2, 0.0), cfg);
  const Tensor ref = reference_capture(hr, taps, side, 2);
  REQUIRE(fused.same_shape(ref));
  CHECK(max_abs_diff(fused, ref) < 1e-10);
}

TEST_CASE("simulate_capture: extras and size contract") {
  CaptureConfig cfg;
  cfg.S = 2;
  cfg.tone_gamma = 0.5;
  const Tensor quarter(8, 8, 1, 0.25);
  const Tensor toned = simulate_capture(quarter, Psf::delta(), cfg);
  for (double v : toned.data())
    CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

  cfg.tone_gamma.reset();
  cfg.noise_sigma = 0.3;
  cfg.noise_seed = 9;
  Rng rng(1);
  const Tensor hr = random_tensor(rng, 32, 32, 1, 0.0, 1.0);
  const Tensor a = simulate_capture(hr, Psf::gaussian(0.5, 0.5, 0.0), cfg);
  const Tensor b = simulate_capture(hr, Psf::gaussian(0.5, 0.5, 0.0), cfg);
  CHECK(a == b);
  for (double v : a.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  cfg.noise_seed = 10;
  CHECK_FALSE(simulate_capture(hr, Psf::gaussian(0.5, 0.5, 0.0), cfg) == a);

  cfg.noise_sigma = 0.0;
  try {
    simulate_capture(Tensor(8, 8, 1), Psf::gaussian(1.0, 1.0, 0.0), cfg);
    FAIL("expected a size violation");
  } catch (const ContractViolation& e) {
    CHECK(std::string(e.what()).find("need at least 14") != std::string::npos);
  }
}

TEST_CASE("make_pair: size arithmetic and co-sited delta collapse") {
  Rng rng(6);
  const Tensor hr = random_tensor(rng, 256, 256, 1, 0.0, 1.0);
  const TrainingPair p = make_pair(hr, Psf::delta(), 2, 4);
  REQUIRE(p.label.height() == 128);
  REQUIRE(p.label.width() == 128);
  REQUIRE(p.input.height() == 32);
  REQUIRE(p.input.width() == 32);
  CHECK(p.R == 4);
  CHECK(p.S == 2);
  CHECK(p.provenance == Provenance::kCaptureSim);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      CHECK(p.input(i, j, 0) == p.label(4 * i, 4 * j, 0));
      CHECK(p.input(i, j, 0) == hr(8 * i, 8 * j, 0));
    }
}

TEST_CASE("make_pair: Gaussian PSF keeps label = R x input and co-sited sampling") {
  Rng rng(7);
  const Tensor hr = random_tensor(rng, 200, 180, 1, 0.0, 1.0);
  const Psf psf = Psf::gaussian(0.7, 0.5, 0.9);
  const TrainingPair p = make_pair(hr, psf, 2, 4);
  CHECK(p.label.height() == 4 * p.input.height());
  CHECK(p.label.width() == 4 * p.input.width());
  // The input capture is simulate_capture at S*R on the shared crop, whose
  // top-left corner is the source origin for the wider kernel.
  CaptureConfig cfg;
  cfg.S = 8;
  const Tensor direct = simulate_capture(hr, psf, cfg);
  for (int i = 0; i < p.input.height(); ++i)
    for (int j = 0; j < p.input.width(); ++j) CHECK(p.input(i, j, 0) == direct(i, j, 0));
}

TEST_CASE("make_pair: exact crop reproduces simulate_capture at S*R entirely") {
  const Psf psf = Psf::gaussian(0.6, 0.6, 0.0);
  const int margin = stretch_psf(psf, 8).k_h / 2;
  Rng rng(12);
  const Tensor hr = random_tensor(rng, 2 * margin + 8 * 5, 2 * margin + 8 * 6, 1, 0.0, 1.0);
  CaptureConfig cfg;
  cfg.S = 8;
  CHECK(make_pair(hr, psf, 2, 4).input == simulate_capture(hr, psf, cfg));
}

TEST_CASE("make_pair: determinism, extras switch and errors") {
  Rng rng(13);
  const Tensor hr = random_tensor(rng, 96, 96, 1, 0.0, 1.0);
  CaptureExtras ex;
  ex.noise_sigma = 0.02;
  ex.tone_gamma = 0.9;
  ex.noise_seed = 77;
  const Psf psf = Psf::gaussian(0.5, 0.4, 0.2);
  const TrainingPair a = make_pair(hr, psf, 2, 4, ex);
  const TrainingPair b = make_pair(hr, psf, 2, 4, ex);
  CHECK(a.input == b.input);
  CHECK(a.label == b.label);

  ex.extras_on_label = false;
  const TrainingPair clean_label = make_pair(hr, psf, 2, 4, ex);
  CHECK(clean_label.label == make_pair(hr, psf, 2, 4).label);
  CHECK(clean_label.input == a.input);

  try {
    make_pair(Tensor(12, 12, 1), psf, 2, 4);
    FAIL("expected a size violation");
  } catch (const ContractViolation& e) {
    CHECK(std::string(e.what()).find("S*R=8") != std::string::npos);
  }
}

TEST_CASE("downscale baseline: sizes, constants and provenance") {
  const TrainingPair p = make_pair_downscale_baseline(Tensor(128, 128, 1, 0.3), 4);
  CHECK(p.input.height() == 32);
  CHECK(p.input.width() == 32);
  CHECK(p.label.height() == 128);
  CHECK(p.provenance == Provenance::kDownscale);
  for (double v : p.input.data()) CHECK(std::abs(v - 0.3) < 1e-12);
  CHECK_THROWS_AS(make_pair_downscale_baseline(Tensor(30, 32, 1), 4), ContractViolation);
}

TEST_CASE("downscale baseline: undoes a bicubic upscale of a ramp in the interior") {
  const int n = 16;
  Tensor small(n, n, 1);
  for (int r = 0; r < n; ++r)
    for (int q = 0; q < n; ++q) small(r, q, 0) = 0.3 + 0.02 * r + 0.015 * q;
  const TrainingPair p = make_pair_downscale_baseline(bicubic_resize(small, {4, 1}), 4);
  for (int r = 3; r < n - 3; ++r)
    for (int q = 3; q < n - 3; ++q) CHECK(std::abs(p.input(r, q, 0) - small(r, q, 0)) < 1e-6);
}

TEST_CASE("synth_scene: in range and deterministic") {
  Rng a(4), b(4);
  const Tensor x = synth_scene(a, 48, 40);
  CHECK(x == synth_scene(b, 48, 40));
  for (double v : x.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
