// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/accounting.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "dsr/errors.hpp"

namespace dsr {
namespace {

using nlohmann::json;

std::uint64_t conv_params(int out, int in, int taps) {
  return static_cast<std::uint64_t>(out) * in * taps * taps + out;
}

double conv_macs(int out, int in, int taps) {
  return static_cast<double>(out) * in * taps * taps;
}

double activation_ops(Activation a, int channels) {
  return a.kind == Activation::Kind::kIdentity ? 0.0 : channels;
}

std::string group_digits(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f", v);
  std::string s = buf;
  std::string out;
  const int n = static_cast<int>(s.size());
  for (int i = 0; i < n; ++i) {
    out.push_back(s[i]);
    if ((n - i - 1) % 3 == 0 && i + 1 < n && s[i] != '-') out.push_back(',');
  }
  return out;
}

}  // namespace

ParamCounts count_params(const TopologySpec& spec) {
  spec.validate();
  ParamCounts c;
  for (std::size_t j = 0; j < spec.process_layers.size(); ++j) {
    const auto& l = spec.process_layers[j];
    c.pixel_flow += conv_params(l.out_channels, spec.process_in_channels(j), l.taps);
  }
  if (!spec.has_control_flow()) return c;

  int in = spec.input_channels;
  for (const auto& l : spec.stats_layers) {
    c.control_flow += conv_params(l.out_channels, in, l.taps);
    if (&l == &spec.stats_layers.back())
      c.control_flow += conv_params(1, in, l.taps) - 1;  // logit map: no bias
    in = l.out_channels;
  }
  int width = spec.fcnn_in();
  for (int h : spec.fcnn_hidden) {
    c.control_flow += static_cast<std::uint64_t>(h) * width + h;
    width = h;
  }
  c.control_flow += static_cast<std::uint64_t>(spec.fcnn_out()) * width + spec.fcnn_out();
  for (std::size_t j = 0; j < spec.process_layers.size(); ++j) {
    const auto& l = spec.process_layers[j];
    c.control_flow += static_cast<std::uint64_t>(spec.bank_size[j]) *
                      conv_params(l.out_channels, spec.process_in_channels(j), l.taps);
  }
  return c;
}

OpsBreakdown count_ops(const TopologySpec& spec, int in_height, int in_width) {
  spec.validate();
  DSR_REQUIRE(in_height > 0 && in_width > 0, "count_ops: input dims must be positive");
  const double px = static_cast<double>(in_height) * in_width;
  const double r2 = static_cast<double>(spec.R) * spec.R;
  OpsBreakdown b;
  b.output_pixels = r2 * px;

  for (std::size_t j = 0; j < spec.process_layers.size(); ++j) {
    const auto& l = spec.process_layers[j];
    b.pixel_ops_per_frame += 2.0 * conv_macs(l.out_channels, spec.process_in_channels(j), l.taps) * px;
    b.pixel_ops_per_frame += activation_ops(l.activation, l.out_channels) * px;
  }
  // Pixel shuffle is a relabeling. The residual add is folded into the
  // bicubic budget, which vanishes at R = 1.
  if (spec.R > 1) b.pixel_ops_per_frame += 2.0 * 16.0 * b.output_pixels;

  if (!spec.has_control_flow()) return b;

  double ctrl = 0.0;
  int in = spec.input_channels;
  for (const auto& l : spec.stats_layers) {
    ctrl += 2.0 * conv_macs(l.out_channels, in, l.taps) * px;
    ctrl += activation_ops(l.activation, l.out_channels) * px;
    if (&l == &spec.stats_layers.back()) ctrl += 2.0 * conv_macs(1, in, l.taps) * px;
    in = l.out_channels;
  }
  // Softmax over the logit map, then one MAC per pixel and channel.
  ctrl += px + 2.0 * spec.stats_dim() * px;
  int width = spec.fcnn_in();
  for (int h : spec.fcnn_hidden) {
    ctrl += 2.0 * h * width + activation_ops(spec.fcnn_activation, h);
    width = h;
  }
  ctrl += 2.0 * spec.fcnn_out() * width;
  if (spec.simplex_mixing) ctrl += spec.fcnn_out();
  for (std::size_t j = 0; j < spec.process_layers.size(); ++j) {
    const auto& l = spec.process_layers[j];
    const double per_kernel =
        static_cast<double>(conv_params(l.out_channels, spec.process_in_channels(j), l.taps));
    ctrl += 2.0 * spec.bank_size[j] * per_kernel;
  }
  b.control_ops_per_trigger = ctrl;
  return b;
}

double count_ops_per_output_pixel(const TopologySpec& spec, long k, int in_height, int in_width) {
  DSR_REQUIRE(k >= 1, "count_ops: trigger period K must be >= 1");
  const OpsBreakdown b = count_ops(spec, in_height, in_width);
  return (b.pixel_ops_per_frame + b.control_ops_per_trigger / static_cast<double>(k)) /
         b.output_pixels;
}

double tops(double ops_per_output_pixel, double out_w, double out_h, double fps) {
  DSR_REQUIRE(ops_per_output_pixel >= 0.0 && out_w > 0.0 && out_h > 0.0 && fps > 0.0,
              "tops: inputs must be positive");
  return ops_per_output_pixel * out_w * out_h * fps / 1e12;
}

TopologySpec dense_reference_spec(int r) {
  TopologySpec t;
  t.R = r;
  t.process_layers.push_back({64, 3, Activation::relu()});
  for (int i = 0; i < 6; ++i) t.process_layers.push_back({64, 3, Activation::relu()});
  t.process_layers.push_back({r * r, 3, Activation::identity()});
  t.bank_size.assign(t.process_layers.size(), 1);
  t.pref_dim = 0;
  return t;
}

OpsReport make_ops_report(const TopologySpec& spec, long k, int in_height, int in_width,
                          double fps) {
  OpsReport r;
  r.params = count_params(spec);
  r.k = k;
  r.in_height = in_height;
  r.in_width = in_width;
  r.fps = fps;
  const OpsBreakdown b = count_ops(spec, in_height, in_width);
  r.ops_per_output_pixel = count_ops_per_output_pixel(spec, k, in_height, in_width);
  r.pixel_only_ops_per_output_pixel = b.pixel_ops_per_frame / b.output_pixels;
  r.control_ops_per_trigger = b.control_ops_per_trigger;
  const double ow = static_cast<double>(in_width) * spec.R;
  const double oh = static_cast<double>(in_height) * spec.R;
  r.tops_amortized = tops(r.ops_per_output_pixel, ow, oh, fps);
  r.tops_pixel_only = tops(r.pixel_only_ops_per_output_pixel, ow, oh, fps);
  return r;
}

json OpsReport::to_json() const {
  return {{"params", {{"pixel_flow", params.pixel_flow}, {"control_flow", params.control_flow}}},
          {"K", k},
          {"input", {{"height", in_height}, {"width", in_width}}},
          {"fps", fps},
          {"ops_per_output_pixel", {{"amortized", ops_per_output_pixel},
                                    {"pixel_flow_only", pixel_only_ops_per_output_pixel}}},
          {"control_ops_per_trigger", control_ops_per_trigger},
          {"tops", {{"amortized", tops_amortized}, {"pixel_flow_only", tops_pixel_only}}}};
}

std::string OpsReport::to_table() const {
  char buf[256];
  std::string out;
  auto row = [&](const char* label, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-32s %s\n", label, value.c_str());
    out += buf;
  };
  std::snprintf(buf, sizeof buf, "input %dx%d, K=%ld, %.0f fps\n", in_height, in_width, k, fps);
  out += buf;
  row("# parameters (control flow)", group_digits(static_cast<double>(params.control_flow)));
  row("# parameters (pixel flow)", group_digits(static_cast<double>(params.pixel_flow)));
  std::snprintf(buf, sizeof buf, "%.1f", ops_per_output_pixel);
  row("# ops per output pixel", buf);
  std::snprintf(buf, sizeof buf, "%.1f", pixel_only_ops_per_output_pixel);
  row("# ops per output pixel (pixel)", buf);
  std::snprintf(buf, sizeof buf, "%.4f", tops_amortized);
  row("# TOPs (10^12) per second", buf);
  std::snprintf(buf, sizeof buf, "%.4f", tops_pixel_only);
  row("# TOPs per second (pixel)", buf);
  return out;
}

json published_tops_check() {
  constexpr double kOutW = 1280.0;
  constexpr double kOutH = 1080.0;
  constexpr double kFps = 30.0;
  json rows = json::array();
  for (const PublishedRow& p : {kPublishedDense, kPublishedDualRate}) {
    const double t = tops(p.ops_per_output_pixel, kOutW, kOutH, kFps);
    rows.push_back({{"name", p.name},
                    {"ops_per_output_pixel", p.ops_per_output_pixel},
                    {"tops", t},
                    {"published_tops", p.tops},
                    {"rel_error", std::abs(t - p.tops) / p.tops}});
  }
  return {{"output", {{"width", kOutW}, {"height", kOutH}}}, {"fps", kFps}, {"rows", rows}};
}

}  // namespace dsr
