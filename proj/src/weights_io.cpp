// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace dsr {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "dsr-weights";
constexpr int kVersion = 1;

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& manifest, const Checkpoint& ckpt) {
  ckpt.params.check_shapes(ckpt.spec);
  json tensors = json::array();
  std::vector<unsigned char> blob;
  std::size_t offset = 0;
  ckpt.params.for_each([&](const std::string& name, ParamGroup g, std::span<const double> v) {
    tensors.push_back({{"name", name}, {"group", to_string(g)}, {"count", v.size()},
                       {"offset", offset}});
    offset += v.size();
    for (double x : v) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(x));
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
  });
  const auto bin = blob_path(manifest);
  json m = {{"format", kFormat},
            {"version", kVersion},
            {"topology", ckpt.spec.to_json()},
            {"generation", ckpt.generation},
            {"blob", bin.filename().string()},
            {"dtype", "float32-le"},
            {"total", offset},
            {"tensors", std::move(tensors)}};

  if (manifest.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(manifest.parent_path(), ec);
  }
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + manifest.string() + "'");
  out << m.dump(2) << '\n';
  std::ofstream ob(bin, std::ios::binary);
  if (!ob) throw IoError("cannot write weight blob '" + bin.string() + "'");
  ob.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!out || !ob) throw IoError("short write of checkpoint '" + manifest.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + manifest.string() + "'");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("checkpoint '" + manifest.string() + "' is not valid JSON: " + e.what());
  }
  Checkpoint ck;
  std::vector<unsigned char> blob;
  try {
    if (m.at("format").get<std::string>() != kFormat || m.at("version").get<int>() != kVersion)
      throw IoError("checkpoint '" + manifest.string() + "' has unsupported format/version");
    ck.spec = TopologySpec::from_json(m.at("topology"));
    ck.generation = m.at("generation").get<std::uint64_t>();
    ck.params = ModelParams::zeros(ck.spec);

    const auto bin = manifest.parent_path() / m.at("blob").get<std::string>();
    std::ifstream ib(bin, std::ios::binary);
    if (!ib) throw IoError("cannot open weight blob '" + bin.string() + "'");
    blob.assign(std::istreambuf_iterator<char>(ib), std::istreambuf_iterator<char>());

    const auto& tensors = m.at("tensors");
    std::size_t idx = 0;
    ck.params.for_each([&](const std::string& name, ParamGroup, std::span<double> v) {
      if (idx >= tensors.size()) throw IoError("checkpoint lacks tensor '" + name + "'");
      const auto& t = tensors[idx++];
      if (t.at("name").get<std::string>() != name || t.at("count").get<std::size_t>() != v.size())
        throw IoError("checkpoint tensor '" + t.at("name").get<std::string>() +
                      "' does not match topology entry '" + name + "'");
      const std::size_t off = t.at("offset").get<std::size_t>();
      if ((off + v.size()) * 4 > blob.size())
        throw IoError("weight blob too short for tensor '" + name + "'");
      for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
          bits |= static_cast<std::uint32_t>(blob[(off + i) * 4 + b]) << (8 * b);
        v[i] = static_cast<double>(std::bit_cast<float>(bits));
      }
    });
    if (idx != tensors.size()) throw IoError("checkpoint has extra tensors");
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint '" + manifest.string() + "': " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("checkpoint '" + manifest.string() + "': " + e.what());
  }
  return ck;
}

ModelParams quantize_params(const ModelParams& p) {
  ModelParams q = p;
  q.for_each([](const std::string&, ParamGroup, std::span<double> v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  });
  return q;
}

}  // namespace dsr
