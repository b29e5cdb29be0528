// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsr/rng.hpp"
#include "dsr/tensor.hpp"
#include "json.hpp"

namespace dsr {

/// Lens point-spread function at scale 1. Always unit mass once discretized.
struct Psf {
  enum class Kind { kParametric, kTabulated, kDelta };

  Kind kind = Kind::kParametric;
  // kParametric: anisotropic Gaussian, sigmas in pixels, theta in radians.
  double sigma_major = 1.0;
  double sigma_minor = 1.0;
  double theta = 0.0;
  // kTabulated: odd-sized square grid, non-negative, sums to 1.
  int grid_size = 0;
  std::vector<double> grid;

  static Psf gaussian(double sigma_major, double sigma_minor, double theta);
  static Psf tabulated(int size, std::vector<double> taps);
  /// Discrete unit impulse at every scale. Reduces capture to decimation.
  static Psf delta();

  void validate() const;
  nlohmann::json to_json() const;
  static Psf from_json(const nlohmann::json& j);
};

struct PsfSamplerConfig {
  double sigma_lo = 0.4;
  double sigma_hi = 0.9;
  double anisotropy_max = 1.5;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static PsfSamplerConfig from_json(const nlohmann::json& j);
};

/// sigma_major ~ U[lo, hi], sigma_minor = sigma_major / a with
/// a ~ U[1, anisotropy_max], theta ~ U[0, pi).
Psf sample_psf(Rng& rng, const PsfSamplerConfig& cfg);

/// Discrete blur kernel for a capture at factor S. Parametric PSFs are
/// sampled with sigma' = S * sigma on a grid of radius ceil(3 * sigma'_major);
/// tabulated grids are bicubic-resampled by S. The result sums to one.
KernelStack stretch_psf(const Psf& psf, int s);

struct CaptureConfig {
  int S = 2;
  double noise_sigma = 0.0;           // additive Gaussian, after decimation
  std::optional<double> tone_gamma;   // out = in^gamma, before noise
  std::uint64_t noise_seed = 0;

  void validate() const;
};

/// Blur by the stretched PSF (valid support), crop to a multiple of S,
/// decimate at phase (0,0), then tone curve, noise and clip to [0,1].
/// Only the retained samples of the blur are evaluated.
Tensor simulate_capture(const Tensor& hr, const Psf& psf, const CaptureConfig& cfg);

/// Smallest source side that yields at least one output sample.
int min_capture_side(const Psf& psf, int s);

enum class Provenance { kCaptureSim, kDownscale };
std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

struct CaptureExtras {
  double noise_sigma = 0.0;
  std::optional<double> tone_gamma;
  bool extras_on_label = true;   // false: only the input capture gets noise/tone
  std::uint64_t noise_seed = 0;
};

struct TrainingPair {
  Tensor input;
  Tensor label;
  int R = 1;
  int S = 1;
  Provenance provenance = Provenance::kCaptureSim;
  std::optional<Psf> psf;
  std::uint64_t seed = 0;
};

/// Two captures of the same cropped scene at S and S*R. Sampling sites are
/// co-sited: input(i, j) and label(R*i, R*j) see the same source pixel.
TrainingPair make_pair(const Tensor& hr, const Psf& psf, int s, int r,
                       const CaptureExtras& extras = {});

/// Common-practice pair: label = hr, input = area-correct cubic downscale.
TrainingPair make_pair_downscale_baseline(const Tensor& hr, int r);

/// Procedural single-channel scene in [0,1]: shaded background with
/// rectangles, discs, strokes and gratings. Used when no photos are supplied.
Tensor synth_scene(Rng& rng, int height, int width);

}  // namespace dsr
