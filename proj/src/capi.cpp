// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/dsr.h"

#include <cstring>
#include <mutex>
#include <string>

#include "dsr/accounting.hpp"
#include "dsr/commands.hpp"
#include "dsr/errors.hpp"
#include "dsr/image_io.hpp"
#include "dsr/runtime.hpp"
#include "dsr/weights_io.hpp"

struct dsr_tensor {
  dsr::Tensor t;
};

struct dsr_model {
  dsr::TopologySpec spec;
  dsr::ModelParams params;
  std::uint64_t generation = 0;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mu;
dsr_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void log_message(const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_log_mu);
  if (g_log_fn) g_log_fn(msg.c_str(), g_log_user);
}

dsr_status set_error(dsr_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename Fn>
dsr_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return DSR_OK;
  } catch (const dsr::ConfigError& e) {
    return set_error(DSR_ERR_CONFIG, e.what());
  } catch (const dsr::ContractViolation& e) {
    return set_error(DSR_ERR_ARGUMENT, e.what());
  } catch (const dsr::IoError& e) {
    return set_error(DSR_ERR_IO, e.what());
  } catch (const dsr::DivergenceError& e) {
    return set_error(DSR_ERR_DIVERGENCE, e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(DSR_ERR_CONFIG, e.what());
  } catch (const std::exception& e) {
    return set_error(DSR_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(DSR_ERR_INTERNAL, "unknown failure");
  }
}

#define DSR_CHECK_ARG(cond, msg) \
  if (!(cond)) return set_error(DSR_ERR_ARGUMENT, msg)

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* dsr_version(void) { return "1.0.0"; }

const char* dsr_last_error(void) { return g_last_error.c_str(); }

const char* dsr_status_name(dsr_status status) {
  switch (status) {
    case DSR_OK: return "ok";
    case DSR_ERR_INTERNAL: return "internal error";
    case DSR_ERR_CONFIG: return "config error";
    case DSR_ERR_IO: return "I/O error";
    case DSR_ERR_DIVERGENCE: return "divergence";
    case DSR_ERR_GRADCHECK: return "gradient check failed";
    case DSR_ERR_ARGUMENT: return "invalid argument";
  }
  return "unknown status";
}

void dsr_set_log_callback(dsr_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mu);
  g_log_fn = fn;
  g_log_user = user;
}

dsr_status dsr_tensor_create(int height, int width, int channels, const double* data,
                             dsr_tensor** out) {
  DSR_CHECK_ARG(out != nullptr, "dsr_tensor_create: out is null");
  *out = nullptr;
  return guarded([&] {
    auto h = std::make_unique<dsr_tensor>();
    h->t = dsr::Tensor(height, width, channels);
    if (data) std::memcpy(h->t.data().data(), data, h->t.size() * sizeof(double));
    *out = h.release();
  });
}

void dsr_tensor_free(dsr_tensor* t) { delete t; }

dsr_status dsr_tensor_shape(const dsr_tensor* t, int* height, int* width, int* channels) {
  DSR_CHECK_ARG(t != nullptr, "dsr_tensor_shape: null tensor");
  if (height) *height = t->t.height();
  if (width) *width = t->t.width();
  if (channels) *channels = t->t.channels();
  g_last_error.clear();
  return DSR_OK;
}

dsr_status dsr_tensor_copy_data(const dsr_tensor* t, double* buf, size_t capacity) {
  DSR_CHECK_ARG(t != nullptr && buf != nullptr, "dsr_tensor_copy_data: null argument");
  DSR_CHECK_ARG(capacity >= t->t.size(),
                "dsr_tensor_copy_data: buffer holds " + std::to_string(capacity) +
                    " values, need " + std::to_string(t->t.size()));
  std::memcpy(buf, t->t.data().data(), t->t.size() * sizeof(double));
  g_last_error.clear();
  return DSR_OK;
}

dsr_status dsr_tensor_read(const char* path, dsr_tensor** out) {
  DSR_CHECK_ARG(path != nullptr && out != nullptr, "dsr_tensor_read: null argument");
  *out = nullptr;
  return guarded([&] {
    auto h = std::make_unique<dsr_tensor>();
    h->t = dsr::read_image(path);
    *out = h.release();
  });
}

dsr_status dsr_tensor_write(const dsr_tensor* t, const char* path) {
  DSR_CHECK_ARG(t != nullptr && path != nullptr, "dsr_tensor_write: null argument");
  return guarded([&] {
    const std::string p = path;
    if (p.size() >= 4 && p.compare(p.size() - 4, 4, ".png") == 0)
      dsr::write_png(p, t->t);
    else
      dsr::write_pfm(p, t->t);
  });
}

dsr_status dsr_bicubic_upscale(const dsr_tensor* t, int factor, dsr_tensor** out) {
  DSR_CHECK_ARG(t != nullptr && out != nullptr, "dsr_bicubic_upscale: null argument");
  *out = nullptr;
  return guarded([&] {
    auto h = std::make_unique<dsr_tensor>();
    h->t = dsr::bicubic_resize(t->t, {factor, 1});
    *out = h.release();
  });
}

dsr_status dsr_model_create(const char* topology_json, int r, uint64_t seed, int zero_init,
                            dsr_model** out) {
  DSR_CHECK_ARG(out != nullptr, "dsr_model_create: out is null");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<dsr_model>();
    m->spec = topology_json ? dsr::TopologySpec::from_json(nlohmann::json::parse(topology_json))
                            : dsr::TopologySpec::desk_default(r);
    m->spec.validate();
    if (zero_init) {
      m->params = dsr::ModelParams::zeros(m->spec);
    } else {
      dsr::Rng rng(seed);
      m->params = dsr::ModelParams::random(m->spec, rng);
    }
    *out = m.release();
  });
}

dsr_status dsr_model_load(const char* checkpoint_path, dsr_model** out) {
  DSR_CHECK_ARG(checkpoint_path != nullptr && out != nullptr, "dsr_model_load: null argument");
  *out = nullptr;
  return guarded([&] {
    dsr::Checkpoint c = dsr::load_checkpoint(checkpoint_path);
    auto m = std::make_unique<dsr_model>();
    m->spec = std::move(c.spec);
    m->params = std::move(c.params);
    m->generation = c.generation;
    *out = m.release();
  });
}

dsr_status dsr_model_save(const dsr_model* m, const char* checkpoint_path) {
  DSR_CHECK_ARG(m != nullptr && checkpoint_path != nullptr, "dsr_model_save: null argument");
  return guarded(
      [&] { dsr::save_checkpoint(checkpoint_path, {m->spec, m->params, m->generation}); });
}

void dsr_model_free(dsr_model* m) { delete m; }

dsr_status dsr_model_param_counts(const dsr_model* m, uint64_t* pixel_flow,
                                  uint64_t* control_flow) {
  DSR_CHECK_ARG(m != nullptr, "dsr_model_param_counts: null model");
  return guarded([&] {
    const dsr::ParamCounts c = dsr::count_params(m->spec);
    if (pixel_flow) *pixel_flow = c.pixel_flow;
    if (control_flow) *control_flow = c.control_flow;
  });
}

int dsr_model_upscale(const dsr_model* m) { return m ? m->spec.R : 0; }

dsr_status dsr_model_forward(const dsr_model* m, const dsr_tensor* frame, const double* prefs,
                             size_t n_prefs, dsr_tensor** out) {
  DSR_CHECK_ARG(m != nullptr && frame != nullptr && out != nullptr,
                "dsr_model_forward: null argument");
  *out = nullptr;
  return guarded([&] {
    std::vector<double> pv = prefs ? std::vector<double>(prefs, prefs + n_prefs)
                                   : std::vector<double>(m->spec.pref_dim, 0.5);
    DSR_REQUIRE(static_cast<int>(pv.size()) == m->spec.pref_dim,
                "dsr_model_forward: expected " + std::to_string(m->spec.pref_dim) + " prefs");
    const dsr::Tensor& img = frame->t;
    const dsr::Tensor luma = img.channels() == 1 ? img : dsr::to_luma(img);
    const auto w = dsr::configure(luma, m->params, m->spec, dsr::PrefVector(pv), 1);
    auto h = std::make_unique<dsr_tensor>();
    h->t = dsr::process_frame(img, *w, m->spec);
    *out = h.release();
  });
}

dsr_status dsr_run_command(const char* name, const char* config_json, char** report_json) {
  DSR_CHECK_ARG(name != nullptr && report_json != nullptr, "dsr_run_command: null argument");
  *report_json = nullptr;
  g_last_error.clear();
  nlohmann::json cfg;
  dsr::CommandResult res;
  try {
    cfg = config_json ? nlohmann::json::parse(config_json) : nlohmann::json::object();
  } catch (const nlohmann::json::exception& e) {
    res.exit_code = dsr::kExitConfig;
    res.report = {{"error", std::string("config is not valid JSON: ") + e.what()}};
  }
  if (res.exit_code == dsr::kExitOk) res = dsr::run_command(name, cfg, log_message);
  nlohmann::json out = res.report.is_object() ? res.report : nlohmann::json::object();
  out["artifacts"] = res.artifacts;
  if (!res.text.empty()) out["table"] = res.text;
  out["exit_code"] = res.exit_code;
  try {
    *report_json = dup_string(out.dump(2, ' ', false, nlohmann::json::error_handler_t::replace));
  } catch (const std::exception& e) {
    return set_error(DSR_ERR_INTERNAL, e.what());
  }
  if (res.exit_code != dsr::kExitOk && out.contains("error") && out["error"].is_string())
    g_last_error = out["error"].get<std::string>();
  return static_cast<dsr_status>(res.exit_code);
}

void dsr_string_free(char* s) { delete[] s; }

}  // extern "C"
