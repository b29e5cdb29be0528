// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/topology.hpp"

#include <numeric>
#include <set>
#include <string>

#include "dsr/errors.hpp"

namespace dsr {
namespace {

using nlohmann::json;

json layers_to_json(const std::vector<LayerSpec>& layers) {
  json a = json::array();
  for (const auto& l : layers)
    a.push_back({{"out", l.out_channels}, {"taps", l.taps}, {"activation", to_string(l.activation)}});
  return a;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

std::vector<LayerSpec> layers_from_json(const json& a, const std::string& where) {
  std::vector<LayerSpec> out;
  for (const auto& e : a) {
    reject_unknown(e, {"out", "taps", "activation"}, where);
    LayerSpec l;
    l.out_channels = e.at("out").get<int>();
    l.taps = e.value("taps", 3);
    l.activation = parse_activation(e.value("activation", std::string("relu")));
    out.push_back(l);
  }
  return out;
}

}  // namespace

TopologySpec TopologySpec::desk_default(int r) {
  TopologySpec t;
  t.stats_layers = {{8, 3, Activation::relu()},
                    {16, 3, Activation::relu()},
                    {16, 3, Activation::relu()},
                    {16, 3, Activation::relu()}};
  t.fcnn_hidden = {32, 32};
  t.process_layers = {{12, 3, Activation::relu()},
                      {12, 3, Activation::relu()},
                      {r * r, 3, Activation::identity()}};
  t.bank_size = {8, 8, 8};
  t.R = r;
  t.pref_dim = 1;
  return t;
}

int TopologySpec::stats_dim() const {
  return stats_layers.empty() ? 0 : stats_layers.back().out_channels;
}

int TopologySpec::coeff_count() const {
  return std::accumulate(bank_size.begin(), bank_size.end(), 0);
}

int TopologySpec::fcnn_out() const {
  return independent_bias_coeffs ? 2 * coeff_count() : coeff_count();
}

int TopologySpec::process_in_channels(std::size_t layer) const {
  return layer == 0 ? 1 : process_layers[layer - 1].out_channels;
}

void TopologySpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("topology: " + m); };
  if (R < 1) fail("R must be >= 1");
  if (input_channels < 1) fail("input_channels must be >= 1");
  if (pref_dim < 0) fail("pref_dim must be >= 0");
  if (process_layers.empty()) fail("process_layers must not be empty");
  for (const auto& l : stats_layers)
    if (l.out_channels < 1 || l.taps < 1 || l.taps % 2 == 0)
      fail("stats layers need positive channels and odd taps");
  for (const auto& l : process_layers)
    if (l.out_channels < 1 || l.taps < 1 || l.taps % 2 == 0)
      fail("process layers need positive channels and odd taps");
  if (process_layers.back().out_channels != R * R)
    fail("final process layer must emit R^2 = " + std::to_string(R * R) +
         " channels for the pixel shuffle");
  for (int w : fcnn_hidden)
    if (w < 1) fail("FCNN widths must be positive");
  if (has_control_flow()) {
    if (bank_size.size() != process_layers.size())
      fail("bank_size needs one entry per process layer");
    for (int m : bank_size)
      if (m < 1) fail("every bank layer needs m_j >= 1 candidates");
  }
}

json TopologySpec::to_json() const {
  return {{"input_channels", input_channels},
          {"stats_layers", layers_to_json(stats_layers)},
          {"fcnn_hidden", fcnn_hidden},
          {"fcnn_activation", to_string(fcnn_activation)},
          {"bank_size", bank_size},
          {"process_layers", layers_to_json(process_layers)},
          {"R", R},
          {"pref_dim", pref_dim},
          {"simplex_mixing", simplex_mixing},
          {"independent_bias_coeffs", independent_bias_coeffs}};
}

TopologySpec TopologySpec::from_json(const json& j) {
  TopologySpec t;
  try {
    reject_unknown(j,
                   {"input_channels", "stats_layers", "fcnn_hidden", "fcnn_activation", "bank_size",
                    "process_layers", "R", "pref_dim", "simplex_mixing",
                    "independent_bias_coeffs"},
                   "topology");
    const TopologySpec d = desk_default(j.value("R", 4));
    t.R = j.value("R", 4);
    t.input_channels = j.value("input_channels", 1);
    t.stats_layers = j.contains("stats_layers")
                         ? layers_from_json(j["stats_layers"], "stats_layers")
                         : d.stats_layers;
    t.fcnn_hidden = j.value("fcnn_hidden", d.fcnn_hidden);
    t.fcnn_activation = parse_activation(j.value("fcnn_activation", std::string("relu")));
    t.process_layers = j.contains("process_layers")
                           ? layers_from_json(j["process_layers"], "process_layers")
                           : d.process_layers;
    if (j.contains("bank_size")) {
      if (j["bank_size"].is_number_integer())
        t.bank_size.assign(t.process_layers.size(), j["bank_size"].get<int>());
      else
        t.bank_size = j["bank_size"].get<std::vector<int>>();
    } else {
      t.bank_size.assign(t.process_layers.size(), 8);
    }
    t.pref_dim = j.value("pref_dim", 1);
    t.simplex_mixing = j.value("simplex_mixing", false);
    t.independent_bias_coeffs = j.value("independent_bias_coeffs", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed topology: ") + e.what());
  }
  t.validate();
  return t;
}

}  // namespace dsr
