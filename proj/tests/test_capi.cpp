// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exercises the shared library through dsr.h only.

#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "dsr/dsr.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<double> data_of(const dsr_tensor* t) {
  int h = 0, w = 0, c = 0;
  REQUIRE(dsr_tensor_shape(t, &h, &w, &c) == DSR_OK);
  std::vector<double> buf(static_cast<std::size_t>(h) * w * c);
  REQUIRE(dsr_tensor_copy_data(t, buf.data(), buf.size()) == DSR_OK);
  return buf;
}

dsr_tensor* ramp(int h, int w) {
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 7) % 13) / 13.0;
  dsr_tensor* t = nullptr;
  REQUIRE(dsr_tensor_create(h, w, 1, v.data(), &t) == DSR_OK);
  return t;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dsr_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("tensor handles: create, shape, copy, bounds") {
  const double v[6] = {0, 1, 2, 3, 4, 5};
  dsr_tensor* t = nullptr;
  REQUIRE(dsr_tensor_create(2, 1, 3, v, &t) == DSR_OK);
  int h = 0, w = 0, c = 0;
  CHECK(dsr_tensor_shape(t, &h, &w, &c) == DSR_OK);
  CHECK(h == 2);
  CHECK(w == 1);
  CHECK(c == 3);
  CHECK(data_of(t) == std::vector<double>(v, v + 6));
  double small[4];
  CHECK(dsr_tensor_copy_data(t, small, 4) == DSR_ERR_ARGUMENT);
  CHECK(std::string(dsr_last_error()).find("need 6") != std::string::npos);
  dsr_tensor_free(t);

  dsr_tensor* bad = nullptr;
  CHECK(dsr_tensor_create(-1, 2, 1, nullptr, &bad) == DSR_ERR_ARGUMENT);
  CHECK(bad == nullptr);
  CHECK(dsr_tensor_create(1, 1, 1, nullptr, nullptr) == DSR_ERR_ARGUMENT);
  CHECK(dsr_tensor_shape(nullptr, &h, &w, &c) == DSR_ERR_ARGUMENT);
  dsr_tensor_free(nullptr);
}

TEST_CASE("tensor files through the C API") {
  const fs::path dir = temp_dir("io");
  dsr_tensor* t = ramp(5, 4);
  CHECK(dsr_tensor_write(t, (dir / "a.pfm").c_str()) == DSR_OK);
  dsr_tensor* back = nullptr;
  REQUIRE(dsr_tensor_read((dir / "a.pfm").c_str(), &back) == DSR_OK);
  const auto a = data_of(t), b = data_of(back);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == static_cast<double>(static_cast<float>(a[i])));
  dsr_tensor* missing = nullptr;
  CHECK(dsr_tensor_read((dir / "none.pfm").c_str(), &missing) == DSR_ERR_IO);
  CHECK(std::string(dsr_last_error()).size() > 0);
  dsr_tensor_free(t);
  dsr_tensor_free(back);
}

TEST_CASE("zero-initialised model equals bicubic upscaling") {
  dsr_model* m = nullptr;
  REQUIRE(dsr_model_create(nullptr, 4, 0, 1, &m) == DSR_OK);
  CHECK(dsr_model_upscale(m) == 4);
  dsr_tensor* in = ramp(6, 7);
  dsr_tensor* out = nullptr;
  dsr_tensor* ref = nullptr;
  REQUIRE(dsr_model_forward(m, in, nullptr, 0, &out) == DSR_OK);
  REQUIRE(dsr_bicubic_upscale(in, 4, &ref) == DSR_OK);
  int h = 0, w = 0;
  dsr_tensor_shape(out, &h, &w, nullptr);
  CHECK(h == 24);
  CHECK(w == 28);
  CHECK(data_of(out) == data_of(ref));
  const double prefs[2] = {0.1, 0.2};
  dsr_tensor* tmp = nullptr;
  CHECK(dsr_model_forward(m, in, prefs, 2, &tmp) == DSR_ERR_ARGUMENT);
  CHECK(tmp == nullptr);
  CHECK(dsr_model_forward(nullptr, in, nullptr, 0, &tmp) == DSR_ERR_ARGUMENT);
  dsr_tensor_free(in);
  dsr_tensor_free(out);
  dsr_tensor_free(ref);
  dsr_model_free(m);
}

TEST_CASE("model save and load preserve outputs and counts") {
  const fs::path dir = temp_dir("model");
  dsr_model* m = nullptr;
  REQUIRE(dsr_model_create(nullptr, 4, 7, 0, &m) == DSR_OK);
  uint64_t pixel = 0, control = 0;
  CHECK(dsr_model_param_counts(m, &pixel, &control) == DSR_OK);
  CHECK(pixel == 3172);
  CHECK(control > pixel);
  const std::string path = (dir / "m.json").string();
  REQUIRE(dsr_model_save(m, path.c_str()) == DSR_OK);
  dsr_model* loaded = nullptr;
  REQUIRE(dsr_model_load(path.c_str(), &loaded) == DSR_OK);
  // Saved checkpoints hold float32 values; one more roundtrip is a fixed point.
  const std::string path2 = (dir / "m2.json").string();
  REQUIRE(dsr_model_save(loaded, path2.c_str()) == DSR_OK);
  dsr_model* again = nullptr;
  REQUIRE(dsr_model_load(path2.c_str(), &again) == DSR_OK);
  dsr_tensor* in = ramp(5, 5);
  dsr_tensor *a = nullptr, *b = nullptr;
  REQUIRE(dsr_model_forward(loaded, in, nullptr, 0, &a) == DSR_OK);
  REQUIRE(dsr_model_forward(again, in, nullptr, 0, &b) == DSR_OK);
  CHECK(data_of(a) == data_of(b));
  dsr_model* none = nullptr;
  CHECK(dsr_model_load((dir / "nope.json").c_str(), &none) == DSR_ERR_IO);
  CHECK(dsr_model_create("{\"R\": 0}", 4, 0, 1, &none) == DSR_ERR_CONFIG);
  CHECK(dsr_model_upscale(nullptr) == 0);
  for (dsr_tensor* t : {in, a, b}) dsr_tensor_free(t);
  for (dsr_model* x : {m, loaded, again}) dsr_model_free(x);
}

TEST_CASE("run_command: count-ops report and error codes") {
  char* report = nullptr;
  CHECK(dsr_run_command("count-ops", "{\"K\": 10, \"table1\": true}", &report) == DSR_OK);
  REQUIRE(report != nullptr);
  const nlohmann::json j = nlohmann::json::parse(report);
  dsr_string_free(report);
  CHECK(j["params"]["pixel_flow"] == 3172);
  CHECK(j["ops_per_output_pixel"]["amortized"].get<double>() == doctest::Approx(500.26).epsilon(1e-4));
  CHECK(j["table"].get<std::string>().find("TOPs") != std::string::npos);

  CHECK(dsr_run_command("count-ops", "{\"bogus\": 1}", &report) == DSR_ERR_CONFIG);
  REQUIRE(report != nullptr);
  CHECK(nlohmann::json::parse(report)["error"].get<std::string>().find("bogus") != std::string::npos);
  dsr_string_free(report);

  CHECK(dsr_run_command("count-ops", "{not json", &report) == DSR_ERR_CONFIG);
  dsr_string_free(report);
  CHECK(dsr_run_command("no-such-command", "{}", &report) == DSR_ERR_CONFIG);
  dsr_string_free(report);
  CHECK(dsr_run_command(nullptr, "{}", &report) == DSR_ERR_ARGUMENT);
  CHECK(std::string(dsr_status_name(DSR_ERR_GRADCHECK)).size() > 0);
  CHECK(std::string(dsr_version()).size() > 0);
}

TEST_CASE("log callback receives command diagnostics") {
  std::vector<std::string> lines;
  dsr_set_log_callback(
      [](const char* msg, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(msg); },
      &lines);
  const fs::path dir = temp_dir("psf");
  const std::string cfg = "{\"output\": \"" + (dir / "psf").string() + "\", \"S\": 2}";
  char* report = nullptr;
  CHECK(dsr_run_command("psf-preview", cfg.c_str(), &report) == DSR_OK);
  dsr_string_free(report);
  dsr_set_log_callback(nullptr, nullptr);
  CHECK_FALSE(lines.empty());
}
