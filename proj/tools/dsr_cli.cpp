// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0
//
// dsr_cli <command> [--config run.json] [overrides...]
//
// Artifact paths (and the count-ops table) go to stdout, diagnostics to
// stderr. Exit codes: 0 ok, 1 internal, 2 config, 3 I/O, 4 divergence,
// 5 gradient check failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsr/dsr.h"
#include "json.hpp"

namespace {

using nlohmann::json;

struct Overrides {
  std::string config_path;
  std::vector<std::string> sets;  // key=value, value parsed as JSON when possible
  std::map<std::string, json> flags;
};

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

// "a.b.c" walks into nested objects.
void assign(json& doc, const std::string& dotted, json value) {
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? dotted.npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

int fail(int code, const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return code;
}

void log_to_stderr(const char* message, void*) { std::cerr << message << "\n"; }

int run(const std::string& command, const Overrides& ov) {
  json cfg = json::object();
  if (!ov.config_path.empty()) {
    std::ifstream f(ov.config_path);
    if (!f) return fail(DSR_ERR_IO, "cannot read config '" + ov.config_path + "'");
    try {
      cfg = json::parse(f);
    } catch (const json::exception& e) {
      return fail(DSR_ERR_CONFIG, "config '" + ov.config_path + "' is not valid JSON: " + e.what());
    }
  }
  for (const auto& [key, value] : ov.flags) assign(cfg, key, value);
  for (const std::string& s : ov.sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      return fail(DSR_ERR_CONFIG, "--set expects key=value, got '" + s + "'");
    assign(cfg, s.substr(0, eq), parse_value(s.substr(eq + 1)));
  }

  dsr_set_log_callback(log_to_stderr, nullptr);
  char* raw = nullptr;
  const dsr_status st = dsr_run_command(command.c_str(), cfg.dump().c_str(), &raw);
  if (!raw) return fail(st == DSR_OK ? DSR_ERR_INTERNAL : st, dsr_last_error());
  const json report = json::parse(raw);
  dsr_string_free(raw);

  if (report.contains("table")) std::cout << report["table"].get<std::string>();
  for (const auto& a : report.value("artifacts", json::array())) std::cout << a.get<std::string>() << "\n";
  if (st != DSR_OK) return fail(st, report.value("error", std::string(dsr_status_name(st))));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-rate super-resolution toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dsr_version());

  Overrides ov;
  std::string chosen;
  // Flags are optional; only the ones given land in the config document.
  auto add = [&](CLI::App* sub, const std::string& name, const std::string& key,
                 const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&ov, key](const std::string& v) { ov.flags[key] = parse_value(v); }, help);
  };
  auto add_flag = [&](CLI::App* sub, const std::string& name, const std::string& key,
                      const std::string& help) {
    sub->add_flag_callback(name, [&ov, key] { ov.flags[key] = true; }, help);
  };
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", ov.config_path, "JSON run config");
    sub->add_option("--set", ov.sets, "override: key=value (value is JSON), dotted keys nest");
    add(sub, "--seed", "seed", "global seed");
    add(sub, "-o,--output", "output", "output path");
    sub->callback([&chosen, sub] { chosen = sub->get_name(); });
  };

  auto* datagen = app.add_subcommand("datagen", "simulate capture pairs into a dataset directory");
  common(datagen);
  add(datagen, "--sources", "sources", "directory of high-resolution PNG/PFM images");
  add(datagen, "--count", "synthetic.count", "number of synthetic scenes (no --sources)");
  add(datagen, "--input-size", "synthetic.input_size", "synthetic pair input side");
  add(datagen, "--R", "R", "upscale ratio");
  add(datagen, "--S", "S", "simulation factor");
  add_flag(datagen, "--baseline", "baseline", "plain bicubic-downscale pairs");

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  common(train);
  add(train, "--dataset", "dataset", "dataset directory");
  add(train, "--steps", "steps", "optimizer steps");
  add(train, "--lr", "learning_rate", "learning rate");
  add(train, "--init", "init", "checkpoint to start from");

  auto* infer = app.add_subcommand("infer", "run the dual-rate pipeline over a frame directory");
  common(infer);
  add(infer, "--checkpoint", "checkpoint", "checkpoint manifest");
  add(infer, "--input", "input", "directory of frame_NNNNNN.pfm/.png");
  add(infer, "--K", "K", "configuration period in frames");
  add(infer, "--mode", "mode", "interleaved | concurrent");

  auto* ops = app.add_subcommand("count-ops", "parameter and operation counts");
  common(ops);
  add(ops, "--K", "K", "configuration period in frames");
  add(ops, "--R", "R", "upscale ratio for the default topology");
  add_flag(ops, "--table1", "table1", "reproduce the published TOPs column");
  add_flag(ops, "--dense-reference", "dense_reference", "compare with the dense reference stack");

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of every parameter group");
  common(gc);
  add(gc, "--eps", "eps", "finite-difference step (initial step for ridders)");
  add(gc, "--method", "method", "ridders | central");
  add(gc, "--eps-sweep", "eps_sweep", "JSON list of steps to sweep");
  add(gc, "--samples", "samples", "entries per parameter group");
  add_flag(gc, "--linear", "linear", "identity activations (exact up to rounding)");

  auto* psf = app.add_subcommand("psf-preview", "write a stretched PSF as PFM and PNG heatmap");
  common(psf);
  add(psf, "--S", "S", "stretch factor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : DSR_ERR_CONFIG;
  }
  return run(chosen, ov);
}
