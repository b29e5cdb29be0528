// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "dsr/accounting.hpp"
#include "dsr/dataset.hpp"
#include "dsr/errors.hpp"
#include "dsr/image_io.hpp"
#include "dsr/runtime.hpp"
#include "dsr/training.hpp"
#include "dsr/weights_io.hpp"

namespace dsr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void check_keys(const json& cfg, const std::set<std::string>& allowed, const std::string& where) {
  if (!cfg.is_object()) throw ConfigError(where + ": config must be a JSON object");
  for (const auto& [key, _] : cfg.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get(const json& cfg, const std::string& key, T fallback) {
  if (!cfg.contains(key) || cfg[key].is_null()) return fallback;
  try {
    return cfg[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' has the wrong type (" + cfg[key].dump() + ")");
  }
}

std::string require_path(const json& cfg, const std::string& key, const std::string& where) {
  const std::string p = get<std::string>(cfg, key, "");
  if (p.empty()) throw ConfigError(where + ": '" + key + "' is required");
  return p;
}

template <typename Fn>
auto as_config(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const ContractViolation& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

TopologySpec topology_from(const json& cfg, int default_r) {
  if (cfg.contains("topology")) {
    return as_config("topology", [&] { return TopologySpec::from_json(cfg["topology"]); });
  }
  const TopologySpec t = TopologySpec::desk_default(default_r);
  as_config("topology", [&] { t.validate(); return 0; });
  return t;
}

PrefVector prefs_from(const json& cfg, const TopologySpec& spec) {
  std::vector<double> v = get<std::vector<double>>(cfg, "prefs", {});
  if (v.empty()) v.assign(spec.pref_dim, 0.5);
  if (static_cast<int>(v.size()) != spec.pref_dim)
    throw ConfigError("prefs: expected " + std::to_string(spec.pref_dim) + " values, got " +
                      std::to_string(v.size()));
  return as_config("prefs", [&] { return PrefVector(v); });
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

void emit(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int margin_for(const Psf& psf, int s, int r) {
  return std::max(stretch_psf(psf, s).k_h / 2, stretch_psf(psf, s * r).k_h / 2);
}

Tensor center_crop(const Tensor& t, int h, int w) {
  const int r0 = (t.height() - h) / 2;
  const int q0 = (t.width() - w) / 2;
  Tensor out(h, w, t.channels());
  for (int r = 0; r < h; ++r)
    for (int q = 0; q < w; ++q)
      for (int c = 0; c < t.channels(); ++c) out(r, q, c) = t(r0 + r, q0 + q, c);
  return out;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("source directory '" + dir.string() + "' not found");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string ext = e.path().extension().string();
    if (ext == ".png" || ext == ".pfm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("source directory '" + dir.string() + "' has no .png/.pfm images");
  return out;
}

}  // namespace

// datagen: {"output", "seed", "R", "S", "baseline", "sources" | "synthetic":
// {"count", "input_size"}, "psf": sampler, "noise_sigma", "tone_gamma",
// "extras_on_label", "previews"}
CommandResult cmd_datagen(const json& cfg, const LogFn& log) {
  check_keys(cfg,
             {"output", "seed", "R", "S", "baseline", "sources", "synthetic", "psf",
              "noise_sigma", "tone_gamma", "extras_on_label", "previews"},
             "datagen");
  const fs::path out = require_path(cfg, "output", "datagen");
  const auto seed = get<std::uint64_t>(cfg, "seed", 0);
  const int r = get<int>(cfg, "R", 4);
  const int s = get<int>(cfg, "S", 2);
  const bool baseline = get<bool>(cfg, "baseline", false);
  const bool previews = get<bool>(cfg, "previews", true);
  if (r < 1 || s < 1) throw ConfigError("datagen: R and S must be >= 1");
  CaptureExtras extras;
  extras.noise_sigma = get<double>(cfg, "noise_sigma", 0.0);
  if (cfg.contains("tone_gamma") && !cfg["tone_gamma"].is_null())
    extras.tone_gamma = get<double>(cfg, "tone_gamma", 1.0);
  extras.extras_on_label = get<bool>(cfg, "extras_on_label", true);
  if (extras.noise_sigma < 0.0) throw ConfigError("datagen: noise_sigma must be >= 0");
  if (extras.tone_gamma && !(*extras.tone_gamma > 0.0))
    throw ConfigError("datagen: tone_gamma must be > 0");

  PsfSamplerConfig sampler;
  sampler.seed = seed;
  if (cfg.contains("psf")) {
    json p = cfg["psf"];
    if (p.is_object() && !p.contains("seed")) p["seed"] = seed;
    sampler = as_config("datagen psf", [&] { return PsfSamplerConfig::from_json(p); });
  }
  as_config("datagen psf", [&] { sampler.validate(); return 0; });

  const bool have_sources = cfg.contains("sources") && !cfg["sources"].is_null();
  int synth_count = 0;
  int synth_input = 32;
  if (!have_sources) {
    const json syn = cfg.value("synthetic", json::object());
    check_keys(syn, {"count", "input_size"}, "datagen synthetic");
    synth_count = get<int>(syn, "count", 16);
    synth_input = get<int>(syn, "input_size", 32);
    if (synth_count < 1 || synth_input < 1)
      throw ConfigError("datagen: synthetic count and input_size must be >= 1");
  }

  std::vector<fs::path> sources;
  if (have_sources) sources = list_images(get<std::string>(cfg, "sources", ""));
  const std::size_t n = have_sources ? sources.size() : static_cast<std::size_t>(synth_count);

  Dataset ds;
  ds.info.R = r;
  ds.info.S = baseline ? 1 : s;
  ds.info.provenance = baseline ? Provenance::kDownscale : Provenance::kCaptureSim;
  if (!baseline) ds.info.sampler = sampler;
  ds.info.seed = seed;

  Rng psf_rng(Rng::derive(sampler.seed, 0));
  // Largest kernel margin the sampler can produce, so every synthetic scene
  // can be cropped to exactly input_size * S * R after the valid blur.
  const Psf widest = Psf::gaussian(sampler.sigma_hi, sampler.sigma_hi, 0.0);
  const int max_margin = baseline ? 0 : margin_for(widest, s, r);
  double smin = 1e300, smax = 0.0, ssum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor hr;
    if (have_sources) {
      hr = to_luma(read_image(sources[i]));
    } else {
      Rng scene_rng(Rng::derive(seed, 2 * i + 1));
      const int side = synth_input * (baseline ? r : s * r) + 2 * max_margin;
      hr = synth_scene(scene_rng, side, side);
    }
    TrainingPair pair;
    if (baseline) {
      const int h = hr.height() / r * r;
      const int w = hr.width() / r * r;
      if (h == 0 || w == 0)
        throw ConfigError("datagen: source image smaller than R=" + std::to_string(r));
      pair = make_pair_downscale_baseline(center_crop(hr, h, w), r);
    } else {
      const Psf psf = sample_psf(psf_rng, sampler);
      if (!have_sources) {
        const int side = synth_input * s * r + 2 * margin_for(psf, s, r);
        hr = center_crop(hr, side, side);
      }
      CaptureExtras ex = extras;
      ex.noise_seed = Rng::derive_seed(seed, 2 * i);
      pair = make_pair(hr, psf, s, r, ex);
      smin = std::min(smin, psf.sigma_major);
      smax = std::max(smax, psf.sigma_major);
      ssum += psf.sigma_major;
    }
    pair.seed = Rng::derive_seed(seed, 2 * i);
    ds.pairs.push_back(std::move(pair));
  }
  write_dataset(ds, out, previews);

  CommandResult res;
  res.report = {{"output", out.string()},
                {"pairs", ds.pairs.size()},
                {"R", r},
                {"S", ds.info.S},
                {"provenance", to_string(ds.info.provenance)},
                {"input_shape", {ds.pairs[0].input.height(), ds.pairs[0].input.width()}},
                {"label_shape", {ds.pairs[0].label.height(), ds.pairs[0].label.width()}}};
  std::string summary = "datagen: " + std::to_string(ds.pairs.size()) + " pairs (" +
                        to_string(ds.info.provenance) + ")";
  if (!baseline) {
    res.report["psf_summary"] = {{"sigma_major_min", smin},
                                 {"sigma_major_max", smax},
                                 {"sigma_major_mean", ssum / static_cast<double>(n)}};
    summary += ", PSF sigma_major in [" + fmt("%.3f", smin) + ", " + fmt("%.3f", smax) +
               "] mean " + fmt("%.3f", ssum / static_cast<double>(n));
  }
  emit(log, summary);
  res.artifacts.push_back((out / "manifest.json").string());
  return res;
}

// train: {"dataset", "output", "loss_trace", "topology", "init", "init_gain",
// "eval", "report"} plus the optimisation keys of TrainConfig.
CommandResult cmd_train(const json& cfg, const LogFn& log) {
  check_keys(cfg,
             {"dataset", "output", "loss_trace", "topology", "init", "init_gain", "eval",
              "report", "log_every", "learning_rate", "steps", "batch_size", "optimizer", "adam",
              "seed", "loss", "prefs"},
             "train");
  const fs::path dataset_dir = require_path(cfg, "dataset", "train");
  const fs::path out = require_path(cfg, "output", "train");
  fs::path trace_path = get<std::string>(cfg, "loss_trace", "");
  if (trace_path.empty()) trace_path = fs::path(out).replace_extension(".loss.csv");
  const double init_gain = get<double>(cfg, "init_gain", 0.3);
  const bool do_eval = get<bool>(cfg, "eval", true);
  const long log_every = get<long>(cfg, "log_every", 100);
  json opt = json::object();
  for (const char* k : {"learning_rate", "steps", "batch_size", "optimizer", "adam", "seed",
                        "loss", "prefs"})
    if (cfg.contains(k)) opt[k] = cfg[k];
  const TrainConfig tc = as_config("train", [&] { return TrainConfig::from_json(opt); });
  const std::string init = get<std::string>(cfg, "init", "");

  const Dataset ds = read_dataset(dataset_dir);
  TopologySpec spec = topology_from(cfg, ds.info.R);
  ModelParams params;
  std::uint64_t generation = 0;
  if (!init.empty()) {
    Checkpoint c = load_checkpoint(init);
    if (cfg.contains("topology") && !(c.spec == spec))
      throw ConfigError("train: topology differs from the init checkpoint");
    spec = c.spec;
    params = std::move(c.params);
    generation = c.generation;
  } else {
    Rng rng(Rng::derive(tc.seed, 7));
    params = as_config("train", [&] { return ModelParams::random(spec, rng, init_gain); });
  }
  if (spec.R != ds.info.R)
    throw ConfigError("train: topology R=" + std::to_string(spec.R) + " but dataset R=" +
                      std::to_string(ds.info.R));
  if (!tc.fixed_prefs.empty() && static_cast<int>(tc.fixed_prefs.size()) != spec.pref_dim)
    throw ConfigError("train: prefs must have " + std::to_string(spec.pref_dim) + " values");

  emit(log, "train: " + std::to_string(ds.pairs.size()) + " pairs, " +
                std::to_string(params.count()) + " parameters, " + std::to_string(tc.steps) +
                " steps");
  const TrainResult tr = train(ds.pairs, params, spec, tc, [&](long step, double l) {
    if (log_every > 0 && ((step + 1) % log_every == 0 || step + 1 == tc.steps))
      emit(log, "step " + std::to_string(step + 1) + " loss " + fmt("%.6g", l));
  });

  save_checkpoint(out, {spec, tr.params, generation + static_cast<std::uint64_t>(tc.steps)});
  write_loss_trace_csv(trace_path, tr.loss_trace);

  CommandResult res;
  res.report = {{"checkpoint", out.string()},
                {"loss_trace", trace_path.string()},
                {"steps", tc.steps},
                {"final_loss", tr.loss_trace.empty() ? json(nullptr) : json(tr.loss_trace.back())},
                {"train", tc.to_json()}};
  if (do_eval) {
    const PrefVector prefs(tc.fixed_prefs.empty() ? std::vector<double>(spec.pref_dim, 0.5)
                                                  : tc.fixed_prefs);
    const EvalReport ev = evaluate(quantize_params(tr.params), spec, ds.pairs, prefs);
    res.report["eval"] = ev.to_json();
    emit(log, "train: mean PSNR " + fmt("%.3f", ev.mean_model) + " dB, bicubic " +
                  fmt("%.3f", ev.mean_bicubic) + " dB");
  }
  const std::string report_path = get<std::string>(cfg, "report", "");
  res.artifacts = {out.string(), trace_path.string()};
  if (!report_path.empty()) {
    write_json(report_path, res.report);
    res.artifacts.push_back(report_path);
  }
  return res;
}

// infer: {"checkpoint", "input", "output", "K" | "T_millis" + "fps", "prefs",
// "mode", "lockstep", "config_delay_frames", "previews", "report"}
CommandResult cmd_infer(const json& cfg, const LogFn& log) {
  check_keys(cfg,
             {"checkpoint", "input", "output", "K", "T_millis", "fps", "prefs", "mode",
              "lockstep", "config_delay_frames", "previews", "report"},
             "infer");
  const fs::path ckpt_path = require_path(cfg, "checkpoint", "infer");
  const fs::path in_dir = require_path(cfg, "input", "infer");
  const fs::path out_dir = require_path(cfg, "output", "infer");
  if (cfg.contains("K") && cfg.contains("T_millis"))
    throw ConfigError("infer: give either 'K' or 'T_millis', not both");

  SchedulerConfig sched;
  if (cfg.contains("T_millis")) {
    const double t = get<double>(cfg, "T_millis", 500.0);
    const double fps = get<double>(cfg, "fps", 30.0);
    if (!(t > 0.0) || !(fps > 0.0)) throw ConfigError("infer: T_millis and fps must be > 0");
    sched.trigger = Trigger::every_t_millis(t, fps);
  } else {
    const long k = get<long>(cfg, "K", 10);
    if (k < 1) throw ConfigError("infer: K must be >= 1");
    sched.trigger = Trigger::every_k_frames(k);
  }
  const std::string mode = get<std::string>(cfg, "mode", "interleaved");
  if (mode == "interleaved")
    sched.mode = SchedulerConfig::Mode::kInterleaved;
  else if (mode == "concurrent")
    sched.mode = SchedulerConfig::Mode::kConcurrent;
  else
    throw ConfigError("infer: mode must be 'interleaved' or 'concurrent'");
  sched.lockstep = get<bool>(cfg, "lockstep", true);
  sched.config_delay_frames = get<long>(cfg, "config_delay_frames", 0);
  if (sched.config_delay_frames < 0) throw ConfigError("infer: config_delay_frames must be >= 0");
  const bool previews = get<bool>(cfg, "previews", false);

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  sched.prefs = prefs_from(cfg, ckpt.spec);
  DirectorySource source(in_dir);
  if (source.size() == 0) throw IoError("infer: no frame_NNNNNN.pfm/.png files in '" +
                                        in_dir.string() + "'");
  DirectorySink sink(out_dir, previews);
  const RunReport rr = run_pipeline(source, ckpt.params, ckpt.spec, sched, sink);

  CommandResult res;
  res.report = rr.to_json();
  res.report["output"] = out_dir.string();
  res.report["mode"] = mode;
  fs::path report_path = get<std::string>(cfg, "report", "");
  if (report_path.empty()) report_path = out_dir / "run_report.json";
  write_json(report_path, res.report);
  emit(log, "infer: " + std::to_string(rr.frames) + " frames, " +
                std::to_string(rr.config_invocations) + " configuration runs (K=" +
                std::to_string(rr.period_frames) + ")");
  res.artifacts = {out_dir.string(), report_path.string()};
  if (rr.source_failed) {
    res.report["error"] = "source failed after frame " + std::to_string(rr.last_index) + ": " +
                          rr.error;
    res.exit_code = kExitIo;
  }
  return res;
}

// count-ops: {"topology", "R", "K", "input": [h, w], "fps", "dense_reference",
// "table1", "output"}
CommandResult cmd_count_ops(const json& cfg, const LogFn&) {
  check_keys(cfg, {"topology", "R", "K", "input", "fps", "dense_reference", "table1", "output"},
             "count-ops");
  const int r = get<int>(cfg, "R", 4);
  if (r < 1) throw ConfigError("count-ops: R must be >= 1");
  const TopologySpec spec = topology_from(cfg, r);
  const long k = get<long>(cfg, "K", 10);
  const auto in = get<std::vector<int>>(cfg, "input", {270, 320});
  const double fps = get<double>(cfg, "fps", 30.0);
  if (k < 1) throw ConfigError("count-ops: K must be >= 1");
  if (in.size() != 2 || in[0] < 1 || in[1] < 1)
    throw ConfigError("count-ops: input must be [height, width] with positive entries");
  if (!(fps > 0.0)) throw ConfigError("count-ops: fps must be > 0");

  const OpsReport rep =
      as_config("count-ops", [&] { return make_ops_report(spec, k, in[0], in[1], fps); });
  CommandResult res;
  res.report = rep.to_json();
  res.text = rep.to_table();
  if (get<bool>(cfg, "dense_reference", false)) {
    const OpsReport dense = make_ops_report(dense_reference_spec(spec.R), k, in[0], in[1], fps);
    const double ratio = dense.ops_per_output_pixel / rep.ops_per_output_pixel;
    res.report["dense_reference"] = dense.to_json();
    res.report["dense_reference"]["ratio"] = ratio;
    res.text += "dense reference: " + fmt("%.1f", dense.ops_per_output_pixel) +
                " ops per output pixel, ratio " + fmt("%.2f", ratio) + "x\n";
  }
  if (get<bool>(cfg, "table1", false)) {
    const json t1 = published_tops_check();
    res.report["table1_check"] = t1;
    for (const auto& row : t1["rows"]) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-18s %9.0f ops/px -> %.4f TOPs (published %.3g, rel err %.2e)\n",
                    row["name"].get<std::string>().c_str(),
                    row["ops_per_output_pixel"].get<double>(), row["tops"].get<double>(),
                    row["published_tops"].get<double>(), row["rel_error"].get<double>());
      res.text += buf;
    }
  }
  const std::string out = get<std::string>(cfg, "output", "");
  if (!out.empty()) {
    write_json(out, res.report);
    res.artifacts.push_back(out);
  }
  return res;
}

// grad-check: {"topology", "R", "seed", "method", "eps", "eps_sweep",
// "samples", "input_size", "linear", "loss", "tolerance", "output"}. The sweep
// always uses the plain central stencil so the step/rounding trade-off shows.
CommandResult cmd_grad_check(const json& cfg, const LogFn& log) {
  check_keys(cfg,
             {"topology", "R", "seed", "method", "eps", "eps_sweep", "samples", "input_size",
              "linear", "loss", "tolerance", "output"},
             "grad-check");
  const int r = get<int>(cfg, "R", 4);
  if (r < 1) throw ConfigError("grad-check: R must be >= 1");
  TopologySpec spec = topology_from(cfg, r);
  GradCheckOptions opt;
  opt.seed = get<std::uint64_t>(cfg, "seed", 0);
  const std::string method = get<std::string>(cfg, "method", "ridders");
  if (method == "ridders")
    opt.method = GradCheckOptions::Method::kRidders;
  else if (method == "central")
    opt.method = GradCheckOptions::Method::kCentral;
  else
    throw ConfigError("grad-check: method must be 'ridders' or 'central'");
  opt.eps = get<double>(cfg, "eps", opt.method == GradCheckOptions::Method::kRidders ? 1e-2 : 1e-4);
  opt.samples = get<int>(cfg, "samples", 50);
  const auto sweep = get<std::vector<double>>(cfg, "eps_sweep", {});
  const int n = get<int>(cfg, "input_size", 16);
  const bool linear = get<bool>(cfg, "linear", false);
  const double tol = get<double>(cfg, "tolerance", linear ? 1e-8 : 1e-4);
  const std::string loss_name = get<std::string>(cfg, "loss", "l2");
  if (!(opt.eps > 0.0) || opt.samples < 1 || n < 1 || !(tol > 0.0))
    throw ConfigError("grad-check: eps, samples, input_size and tolerance must be positive");
  for (double e : sweep)
    if (!(e > 0.0)) throw ConfigError("grad-check: eps_sweep entries must be > 0");
  if (loss_name == "l2")
    opt.loss = LossKind::kL2;
  else if (loss_name == "l1")
    opt.loss = LossKind::kL1;
  else
    throw ConfigError("grad-check: loss must be 'l2' or 'l1'");
  if (linear) {
    for (auto& l : spec.stats_layers) l.activation = Activation::identity();
    for (auto& l : spec.process_layers) l.activation = Activation::identity();
    spec.fcnn_activation = Activation::identity();
  }
  as_config("grad-check", [&] { spec.validate(); return 0; });

  Rng rng(opt.seed);
  const ModelParams params = ModelParams::random(spec, rng);
  TrainingPair pair;
  pair.R = spec.R;
  pair.input = Tensor(n, n, 1);
  pair.label = Tensor(n * spec.R, n * spec.R, 1);
  for (double& v : pair.input.data()) v = rng.uniform();
  for (double& v : pair.label.data()) v = rng.uniform();
  std::vector<double> pv(spec.pref_dim);
  for (double& v : pv) v = rng.uniform();
  const PrefVector prefs(pv);

  const GradCheckReport main = grad_check(params, spec, pair, prefs, opt);
  CommandResult res;
  res.report = main.to_json();
  res.report["tolerance"] = tol;
  res.report["linear"] = linear;
  res.report["passed"] = main.max_rel_error() < tol;
  for (const auto& g : main.groups)
    emit(log, "grad-check " + g.group + ": " + std::to_string(g.checked) + " entries, max rel " +
                  fmt("%.3e", g.max_rel_error) + " (" + g.worst + ")");
  if (!sweep.empty()) {
    json rows = json::array();
    GradCheckOptions so = opt;
    so.method = GradCheckOptions::Method::kCentral;
    for (double e : sweep) {
      so.eps = e;
      const GradCheckReport r2 = grad_check(params, spec, pair, prefs, so);
      rows.push_back({{"eps", e}, {"max_rel_error", r2.max_rel_error()}});
      emit(log, "central eps " + fmt("%.1e", e) + ": max rel " + fmt("%.3e", r2.max_rel_error()));
    }
    res.report["eps_sweep"] = rows;
  }
  const std::string out = get<std::string>(cfg, "output", "");
  if (!out.empty()) {
    write_json(out, res.report);
    res.artifacts.push_back(out);
  }
  if (main.max_rel_error() >= tol) {
    res.exit_code = kExitGradCheck;
    res.report["error"] = "gradient check failed: max relative error " +
                          fmt("%.3e", main.max_rel_error()) + " >= " + fmt("%.1e", tol);
  }
  return res;
}

// psf-preview: {"psf" | "sampler", "S", "output"}; writes <output>.pfm and a
// max-normalized <output>.png heatmap of the stretched kernel.
CommandResult cmd_psf_preview(const json& cfg, const LogFn& log) {
  check_keys(cfg, {"psf", "sampler", "S", "output", "seed"}, "psf-preview");
  const fs::path out = require_path(cfg, "output", "psf-preview");
  const int s = get<int>(cfg, "S", 2);
  if (s < 1) throw ConfigError("psf-preview: S must be >= 1");
  if (cfg.contains("psf") && cfg.contains("sampler"))
    throw ConfigError("psf-preview: give either 'psf' or 'sampler', not both");
  Psf psf;
  if (cfg.contains("psf")) {
    psf = Psf::from_json(cfg["psf"]);
  } else {
    json sj = cfg.value("sampler", json::object());
    if (!sj.contains("seed")) sj["seed"] = get<std::uint64_t>(cfg, "seed", 0);
    const PsfSamplerConfig sc = PsfSamplerConfig::from_json(sj);
    as_config("psf-preview", [&] { sc.validate(); return 0; });
    Rng rng(Rng::derive(sc.seed, 0));
    psf = sample_psf(rng, sc);
  }
  const KernelStack k = stretch_psf(psf, s);
  Tensor t(k.k_h, k.k_w, 1, k.weights);
  double peak = 0.0;
  for (double v : k.weights) peak = std::max(peak, v);
  const Tensor heat = scale(t, peak > 0.0 ? 1.0 / peak : 1.0);
  fs::path pfm = out;
  pfm += ".pfm";
  fs::path png = out;
  png += ".png";
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_pfm(pfm, t);
  write_png(png, heat);
  double total = 0.0;
  for (double v : k.weights) total += v;
  CommandResult res;
  res.report = {{"psf", psf.to_json()},
                {"S", s},
                {"size", k.k_h},
                {"sum", total},
                {"peak", peak},
                {"pfm", pfm.string()},
                {"png", png.string()}};
  emit(log, "psf-preview: " + std::to_string(k.k_h) + "x" + std::to_string(k.k_w) + " kernel");
  res.artifacts = {pfm.string(), png.string()};
  return res;
}

std::vector<std::string> command_names() {
  return {"datagen", "train", "infer", "count-ops", "grad-check", "psf-preview"};
}

CommandResult run_command(const std::string& name, const json& cfg, const LogFn& log) {
  CommandResult res;
  auto fail = [&](int code, const std::string& msg) {
    res = CommandResult{};
    res.exit_code = code;
    res.report = {{"error", msg}};
  };
  try {
    if (name == "datagen")
      res = cmd_datagen(cfg, log);
    else if (name == "train")
      res = cmd_train(cfg, log);
    else if (name == "infer")
      res = cmd_infer(cfg, log);
    else if (name == "count-ops")
      res = cmd_count_ops(cfg, log);
    else if (name == "grad-check")
      res = cmd_grad_check(cfg, log);
    else if (name == "psf-preview")
      res = cmd_psf_preview(cfg, log);
    else
      fail(kExitConfig, "unknown command '" + name + "'");
  } catch (const ConfigError& e) {
    fail(kExitConfig, e.what());
  } catch (const ContractViolation& e) {
    fail(kExitConfig, e.what());
  } catch (const IoError& e) {
    fail(kExitIo, e.what());
  } catch (const fs::filesystem_error& e) {
    fail(kExitIo, e.what());
  } catch (const DivergenceError& e) {
    fail(kExitDivergence, e.what());
    res.report["step"] = e.step();
  } catch (const std::exception& e) {
    fail(kExitInternal, e.what());
  }
  return res;
}

}  // namespace dsr
