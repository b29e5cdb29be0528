// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <string>

#include "dsr/image_io.hpp"
#include "json.hpp"

namespace dsr {
namespace {

using nlohmann::json;

std::string pair_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%06zu", i);
  return buf;
}

json shape_of(const Tensor& t) { return {t.height(), t.width(), t.channels()}; }

[[noreturn]] void reject(const std::filesystem::path& dir, const std::string& what) {
  throw IoError("dataset '" + dir.string() + "': " + what);
}

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& dir, bool previews) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  json entries = json::array();
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const TrainingPair& p = ds.pairs[i];
    DSR_REQUIRE(p.R == ds.info.R, "write_dataset: pair R differs from dataset R");
    const std::string stem = pair_stem(i);
    write_pfm(dir / (stem + "_input.pfm"), p.input);
    write_pfm(dir / (stem + "_label.pfm"), p.label);
    if (previews) {
      write_png(dir / (stem + "_input.png"), p.input);
      write_png(dir / (stem + "_label.png"), p.label);
    }
    json e = {{"index", i},
              {"input", stem + "_input.pfm"},
              {"label", stem + "_label.pfm"},
              {"input_shape", shape_of(p.input)},
              {"label_shape", shape_of(p.label)},
              {"provenance", to_string(p.provenance)},
              {"seed", p.seed}};
    e["psf"] = p.psf ? p.psf->to_json() : json(nullptr);
    entries.push_back(std::move(e));
  }
  json manifest = {{"version", kDatasetVersion},
                   {"R", ds.info.R},
                   {"S", ds.info.S},
                   {"provenance", to_string(ds.info.provenance)},
                   {"seed", ds.info.seed},
                   {"pairs", std::move(entries)}};
  manifest["sampler"] = ds.info.sampler ? ds.info.sampler->to_json() : json(nullptr);

  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("short write of manifest in '" + dir.string() + "'");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) reject(dir, "missing manifest.json");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    reject(dir, std::string("manifest is not valid JSON: ") + e.what());
  }

  Dataset ds;
  try {
    if (m.at("version").get<int>() != kDatasetVersion)
      reject(dir, "unsupported manifest version " + m.at("version").dump());
    ds.info.R = m.at("R").get<int>();
    ds.info.S = m.at("S").get<int>();
    if (ds.info.R < 1) reject(dir, "manifest R must be >= 1");
    if (ds.info.S < 1) reject(dir, "manifest S must be >= 1");
    ds.info.provenance = parse_provenance(m.at("provenance").get<std::string>());
    ds.info.seed = m.value("seed", std::uint64_t{0});
    if (m.contains("sampler") && !m["sampler"].is_null())
      ds.info.sampler = PsfSamplerConfig::from_json(m["sampler"]);

    const auto& entries = m.at("pairs");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.at("index").get<std::size_t>() != i)
        reject(dir, "pair entries out of order at position " + std::to_string(i));
      const auto in_shape = e.at("input_shape").get<std::vector<int>>();
      const auto lab_shape = e.at("label_shape").get<std::vector<int>>();
      if (in_shape.size() != 3 || lab_shape.size() != 3)
        reject(dir, "pair " + std::to_string(i) + ": shapes must be [h, w, c]");
      if (lab_shape[0] != ds.info.R * in_shape[0] || lab_shape[1] != ds.info.R * in_shape[1])
        reject(dir, "pair " + std::to_string(i) + ": label dims must equal R=" +
                        std::to_string(ds.info.R) + " x input dims (R mismatch)");

      TrainingPair p;
      p.input = read_pfm(dir / e.at("input").get<std::string>());
      p.label = read_pfm(dir / e.at("label").get<std::string>());
      auto matches = [](const Tensor& t, const std::vector<int>& s) {
        return t.height() == s[0] && t.width() == s[1] && t.channels() == s[2];
      };
      if (!matches(p.input, in_shape) || !matches(p.label, lab_shape))
        reject(dir, "pair " + std::to_string(i) +
                        ": image dimensions disagree with manifest shapes");
      p.R = ds.info.R;
      p.S = ds.info.S;
      p.provenance = parse_provenance(e.at("provenance").get<std::string>());
      p.seed = e.value("seed", std::uint64_t{0});
      if (e.contains("psf") && !e["psf"].is_null()) p.psf = Psf::from_json(e["psf"]);
      ds.pairs.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    reject(dir, std::string("malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    reject(dir, std::string("malformed manifest: ") + e.what());
  }
  return ds;
}

}  // namespace dsr
