// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dsr/capture_sim.hpp"

namespace dsr {

inline constexpr int kDatasetVersion = 1;

struct DatasetInfo {
  int R = 4;
  int S = 2;
  Provenance provenance = Provenance::kCaptureSim;
  std::optional<PsfSamplerConfig> sampler;
  std::uint64_t seed = 0;
};

struct Dataset {
  DatasetInfo info;
  std::vector<TrainingPair> pairs;
};

// Layout:
//   manifest.json                    version, R, S, sampler, seed, pairs[]
//   pair_NNNNNN_input.pfm / _label.pfm   authoritative float tensors
//   pair_NNNNNN_input.png / _label.png   8-bit previews (optional)
void write_dataset(const Dataset& ds, const std::filesystem::path& dir,
                   bool previews = true);
/// Validates the manifest (version, R, per-pair shapes) against the files.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace dsr
