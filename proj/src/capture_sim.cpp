// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/capture_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dsr/ops.hpp"

namespace dsr {
namespace {

double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

void normalize_unit_mass(KernelStack& k) {
  double total = 0.0;
  for (double v : k.weights) total += v;
  DSR_REQUIRE(total > 0.0, "PSF kernel has no mass");
  for (double& v : k.weights) v /= total;
}

KernelStack stretch_parametric(const Psf& psf, int s) {
  const double smaj = s * psf.sigma_major;
  const double smin = s * psf.sigma_minor;
  const int radius = static_cast<int>(std::ceil(3.0 * smaj));
  const int side = 2 * radius + 1;
  KernelStack k(1, 1, side, side);
  const double c = std::cos(psf.theta);
  const double sn = std::sin(psf.theta);
  for (int r = 0; r < side; ++r) {
    const double y = r - radius;
    for (int q = 0; q < side; ++q) {
      const double x = q - radius;
      const double u = x * c + y * sn;
      const double v = -x * sn + y * c;
      k.at(0, 0, r, q) = std::exp(-0.5 * (u * u / (smaj * smaj) + v * v / (smin * smin)));
    }
  }
  normalize_unit_mass(k);
  return k;
}

KernelStack stretch_tabulated(const Psf& psf, int s) {
  const int n = psf.grid_size;
  const int src_radius = (n - 1) / 2;
  const int radius = s * (src_radius + 1) - 1;
  const int side = 2 * radius + 1;
  auto tap = [&](int r, int q) {
    if (r < 0 || q < 0 || r >= n || q >= n) return 0.0;
    return psf.grid[static_cast<std::size_t>(r) * n + q];
  };
  KernelStack k(1, 1, side, side);
  for (int r = 0; r < side; ++r) {
    const double py = static_cast<double>(r - radius) / s + src_radius;
    const int y0 = static_cast<int>(std::floor(py));
    for (int q = 0; q < side; ++q) {
      const double px = static_cast<double>(q - radius) / s + src_radius;
      const int x0 = static_cast<int>(std::floor(px));
      double acc = 0.0;
      for (int dy = -1; dy <= 2; ++dy) {
        const double wy = catmull_rom(py - (y0 + dy));
        if (wy == 0.0) continue;
        for (int dx = -1; dx <= 2; ++dx) {
          const double wx = catmull_rom(px - (x0 + dx));
          if (wx == 0.0) continue;
          acc += wy * wx * tap(y0 + dy, x0 + dx);
        }
      }
      k.at(0, 0, r, q) = std::max(acc, 0.0);
    }
  }
  normalize_unit_mass(k);
  return k;
}

Tensor crop(const Tensor& x, int top, int left, int h, int w) {
  DSR_REQUIRE(top >= 0 && left >= 0 && top + h <= x.height() && left + w <= x.width(),
              "crop out of range");
  Tensor out(h, w, x.channels());
  for (int r = 0; r < h; ++r)
    std::copy_n(x.pixel(top + r, left), static_cast<std::size_t>(w) * x.channels(),
                out.pixel(r, 0));
  return out;
}

void apply_extras(Tensor& t, const CaptureConfig& cfg) {
  if (cfg.tone_gamma) {
    const double g = *cfg.tone_gamma;
    for (double& v : t.data()) v = std::pow(std::max(v, 0.0), g);
  }
  if (cfg.noise_sigma > 0.0) {
    Rng rng(cfg.noise_seed);
    for (double& v : t.data()) v += cfg.noise_sigma * rng.normal();
  }
  for (double& v : t.data()) v = std::clamp(v, 0.0, 1.0);
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

Psf Psf::gaussian(double sigma_major, double sigma_minor, double theta) {
  Psf p;
  p.kind = Kind::kParametric;
  p.sigma_major = sigma_major;
  p.sigma_minor = sigma_minor;
  p.theta = theta;
  p.validate();
  return p;
}

Psf Psf::tabulated(int size, std::vector<double> taps) {
  Psf p;
  p.kind = Kind::kTabulated;
  p.grid_size = size;
  p.grid = std::move(taps);
  p.validate();
  return p;
}

Psf Psf::delta() {
  Psf p;
  p.kind = Kind::kDelta;
  return p;
}

void Psf::validate() const {
  switch (kind) {
    case Kind::kParametric:
      DSR_REQUIRE(sigma_major > 0.0 && sigma_minor > 0.0 && std::isfinite(sigma_major) &&
                      std::isfinite(sigma_minor) && std::isfinite(theta),
                  "PSF sigmas must be positive and finite");
      break;
    case Kind::kTabulated: {
      DSR_REQUIRE(grid_size > 0 && grid_size % 2 == 1, "tabulated PSF grid must be odd-sized");
      DSR_REQUIRE(grid.size() == static_cast<std::size_t>(grid_size) * grid_size,
                  "tabulated PSF grid length mismatch");
      double total = 0.0;
      for (double v : grid) {
        DSR_REQUIRE(v >= 0.0 && std::isfinite(v), "tabulated PSF taps must be finite and >= 0");
        total += v;
      }
      DSR_REQUIRE(std::abs(total - 1.0) <= 1e-9, "tabulated PSF must have unit mass");
      break;
    }
    case Kind::kDelta: break;
  }
}

nlohmann::json Psf::to_json() const {
  switch (kind) {
    case Kind::kParametric:
      return {{"kind", "gaussian"},
              {"sigma_major", sigma_major},
              {"sigma_minor", sigma_minor},
              {"theta", theta}};
    case Kind::kTabulated:
      return {{"kind", "tabulated"}, {"size", grid_size}, {"taps", grid}};
    case Kind::kDelta: return {{"kind", "delta"}};
  }
  return {};
}

Psf Psf::from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian")
      return gaussian(j.at("sigma_major").get<double>(), j.at("sigma_minor").get<double>(),
                      j.value("theta", 0.0));
    if (kind == "tabulated")
      return tabulated(j.at("size").get<int>(), j.at("taps").get<std::vector<double>>());
    if (kind == "delta") return delta();
    throw ConfigError("unknown PSF kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed PSF: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("invalid PSF: ") + e.what());
  }
}

void PsfSamplerConfig::validate() const {
  DSR_REQUIRE(sigma_lo > 0.0, "PSF sampler: sigma_range lower bound must be > 0");
  DSR_REQUIRE(sigma_hi >= sigma_lo, "PSF sampler: sigma_range must satisfy hi >= lo");
  DSR_REQUIRE(anisotropy_max >= 1.0, "PSF sampler: anisotropy_max must be >= 1");
}

nlohmann::json PsfSamplerConfig::to_json() const {
  return {{"sigma_range", {sigma_lo, sigma_hi}},
          {"anisotropy_max", anisotropy_max},
          {"seed", seed}};
}

PsfSamplerConfig PsfSamplerConfig::from_json(const nlohmann::json& j) {
  PsfSamplerConfig c;
  try {
    if (j.contains("sigma_range")) {
      const auto r = j.at("sigma_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("sigma_range must have two entries");
      c.sigma_lo = r[0];
      c.sigma_hi = r[1];
    }
    c.anisotropy_max = j.value("anisotropy_max", c.anisotropy_max);
    c.seed = j.value("seed", c.seed);
    for (const auto& [key, _] : j.items())
      if (key != "sigma_range" && key != "anisotropy_max" && key != "seed")
        throw ConfigError("unknown key '" + key + "' in psf_sampler");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed psf_sampler: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Psf sample_psf(Rng& rng, const PsfSamplerConfig& cfg) {
  cfg.validate();
  const double smaj = rng.uniform(cfg.sigma_lo, cfg.sigma_hi);
  const double a = rng.uniform(1.0, cfg.anisotropy_max);
  const double theta = rng.uniform(0.0, std::numbers::pi);
  return Psf::gaussian(smaj, smaj / a, theta);
}

KernelStack stretch_psf(const Psf& psf, int s) {
  DSR_REQUIRE(s >= 1, "stretch_psf: S must be >= 1");
  psf.validate();
  switch (psf.kind) {
    case Psf::Kind::kParametric: return stretch_parametric(psf, s);
    case Psf::Kind::kTabulated: return stretch_tabulated(psf, s);
    case Psf::Kind::kDelta: {
      KernelStack k(1, 1, 1, 1);
      k.weights[0] = 1.0;
      return k;
    }
  }
  return {};
}

void CaptureConfig::validate() const {
  DSR_REQUIRE(S >= 1, "capture: S must be >= 1");
  DSR_REQUIRE(noise_sigma >= 0.0, "capture: noise_sigma must be >= 0");
  DSR_REQUIRE(!tone_gamma || *tone_gamma > 0.0, "capture: tone gamma must be > 0");
}

int min_capture_side(const Psf& psf, int s) {
  const KernelStack k = stretch_psf(psf, s);
  return k.k_h - 1 + s;
}

Tensor simulate_capture(const Tensor& hr, const Psf& psf, const CaptureConfig& cfg) {
  cfg.validate();
  const KernelStack k = stretch_psf(psf, cfg.S);
  const int radius = k.k_h / 2;
  const int s = cfg.S;
  const int oh = (hr.height() - 2 * radius) / s;
  const int ow = (hr.width() - 2 * radius) / s;
  if (hr.height() - 2 * radius < s || hr.width() - 2 * radius < s) {
    const int need = 2 * radius + s;
    throw ContractViolation("capture: image " + std::to_string(hr.height()) + "x" +
                            std::to_string(hr.width()) + " too small for S=" +
                            std::to_string(s) + " with kernel support " +
                            std::to_string(k.k_h) + "; need at least " +
                            std::to_string(need) + " pixels per side");
  }
  const int c = hr.channels();
  const int side = k.k_h;
  Tensor out(oh, ow, c);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      double* d = out.pixel(i, j);
      for (int u = 0; u < side; ++u)
        for (int v = 0; v < side; ++v) {
          const double w = k.weights[static_cast<std::size_t>(u) * side + v];
          const double* src = hr.pixel(s * i + u, s * j + v);
          for (int ch = 0; ch < c; ++ch) d[ch] += w * src[ch];
        }
    }
  apply_extras(out, cfg);
  return out;
}

std::string to_string(Provenance p) {
  return p == Provenance::kCaptureSim ? "capture_sim" : "downscale";
}

Provenance parse_provenance(const std::string& s) {
  if (s == "capture_sim") return Provenance::kCaptureSim;
  if (s == "downscale") return Provenance::kDownscale;
  throw IoError("unknown provenance '" + s + "'");
}

TrainingPair make_pair(const Tensor& hr, const Psf& psf, int s, int r,
                       const CaptureExtras& extras) {
  DSR_REQUIRE(s >= 1 && r >= 1, "make_pair: S and R must be >= 1");
  const int radius_in = stretch_psf(psf, s * r).k_h / 2;
  const int radius_lab = stretch_psf(psf, s).k_h / 2;
  const int margin = std::max(radius_in, radius_lab);
  const int sr = s * r;
  const int n_h = (hr.height() - 2 * margin) / sr;
  const int n_w = (hr.width() - 2 * margin) / sr;
  if (hr.height() - 2 * margin < sr || hr.width() - 2 * margin < sr)
    throw ContractViolation("make_pair: image " + std::to_string(hr.height()) + "x" +
                            std::to_string(hr.width()) + " too small; after removing a " +
                            std::to_string(margin) + "-pixel kernel margin each dimension "
                            "must hold at least one multiple of S*R=" + std::to_string(sr));

  // Shared crop: both captures see the same top-left-anchored region, so
  // their decimation grids are co-sited.
  const int hh = 2 * margin + sr * n_h;
  const int ww = 2 * margin + sr * n_w;
  const int off_in = margin - radius_in;
  const int off_lab = margin - radius_lab;

  CaptureConfig in_cfg;
  in_cfg.S = sr;
  in_cfg.noise_sigma = extras.noise_sigma;
  in_cfg.tone_gamma = extras.tone_gamma;
  in_cfg.noise_seed = Rng::derive(extras.noise_seed, 1).next_u64();
  CaptureConfig lab_cfg;
  lab_cfg.S = s;
  if (extras.extras_on_label) {
    lab_cfg.noise_sigma = extras.noise_sigma;
    lab_cfg.tone_gamma = extras.tone_gamma;
    lab_cfg.noise_seed = Rng::derive(extras.noise_seed, 0).next_u64();
  }

  TrainingPair p;
  p.input = simulate_capture(crop(hr, off_in, off_in, hh - 2 * off_in, ww - 2 * off_in),
                             psf, in_cfg);
  p.label = simulate_capture(crop(hr, off_lab, off_lab, hh - 2 * off_lab, ww - 2 * off_lab),
                             psf, lab_cfg);
  p.R = r;
  p.S = s;
  p.provenance = Provenance::kCaptureSim;
  p.psf = psf;
  p.seed = extras.noise_seed;
  DSR_REQUIRE(p.label.height() == r * p.input.height() && p.label.width() == r * p.input.width(),
              "make_pair: internal size mismatch");
  return p;
}

TrainingPair make_pair_downscale_baseline(const Tensor& hr, int r) {
  DSR_REQUIRE(r >= 1, "downscale baseline: R must be >= 1");
  if (hr.height() % r != 0 || hr.width() % r != 0)
    throw ContractViolation("downscale baseline: image " + std::to_string(hr.height()) + "x" +
                            std::to_string(hr.width()) + " must be a multiple of R=" +
                            std::to_string(r));
  TrainingPair p;
  p.label = hr;
  for (double& v : p.label.data()) v = std::clamp(v, 0.0, 1.0);
  p.input = bicubic_resize(hr, Ratio{1, r});
  for (double& v : p.input.data()) v = std::clamp(v, 0.0, 1.0);
  p.R = r;
  p.S = 1;
  p.provenance = Provenance::kDownscale;
  return p;
}

Tensor synth_scene(Rng& rng, int height, int width) {
  Tensor img(height, width, 1);
  const double gx = rng.uniform(-0.4, 0.4) / width;
  const double gy = rng.uniform(-0.4, 0.4) / height;
  const double base = rng.uniform(0.3, 0.7);
  for (int r = 0; r < height; ++r)
    for (int q = 0; q < width; ++q) img(r, q, 0) = base + gx * q + gy * r;

  const int shapes = 12 + static_cast<int>(rng.below(12));
  for (int n = 0; n < shapes; ++n) {
    const double level = rng.uniform();
    const double alpha = rng.uniform(0.6, 1.0);
    const int kind = static_cast<int>(rng.below(4));
    const double cy = rng.uniform(0, height);
    const double cx = rng.uniform(0, width);
    const double size = rng.uniform(0.03, 0.25) * std::min(height, width);
    const double ang = rng.uniform(0.0, std::numbers::pi);
    const double ca = std::cos(ang);
    const double sa = std::sin(ang);
    const double freq = rng.uniform(0.15, 0.9);
    const double aspect = rng.uniform(0.2, 1.0);
    for (int r = 0; r < height; ++r)
      for (int q = 0; q < width; ++q) {
        const double dy = r - cy;
        const double dx = q - cx;
        const double u = dx * ca + dy * sa;
        const double v = -dx * sa + dy * ca;
        double cover = 0.0;
        double value = level;
        switch (kind) {
          case 0:  // rotated rectangle, half-pixel soft edge
            cover = smoothstep(0.5, -0.5, std::abs(u) - size) *
                    smoothstep(0.5, -0.5, std::abs(v) - size * aspect);
            break;
          case 1:  // disc
            cover = smoothstep(0.5, -0.5, std::hypot(u, v / aspect) - size);
            break;
          case 2:  // stroke
            cover = smoothstep(0.5, -0.5, std::abs(v) - 0.5 - 2.0 * aspect) *
                    smoothstep(0.5, -0.5, std::abs(u) - 2.0 * size);
            break;
          default:  // grating patch
            cover = smoothstep(0.5, -0.5, std::hypot(u, v) - size);
            value = 0.5 + 0.5 * std::sin(freq * u) * (2.0 * level - 1.0) + 0.0;
            break;
        }
        if (cover > 0.0) {
          double& px = img(r, q, 0);
          px = px + alpha * cover * (value - px);
        }
      }
  }
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

}  // namespace dsr
