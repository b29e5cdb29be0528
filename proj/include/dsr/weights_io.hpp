// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include "dsr/srnet.hpp"

namespace dsr {

struct Checkpoint {
  TopologySpec spec;
  ModelParams params;
  std::uint64_t generation = 0;  // optimizer steps applied so far
};

// A checkpoint is `<path>` (JSON manifest: format, version, topology,
// generation, blob name, tensors[{name, group, count, offset}]) plus
// `<path minus extension>.bin`, a blob of little-endian float32 values in
// manifest order. Offsets and counts are in elements.
void save_checkpoint(const std::filesystem::path& manifest, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

/// Parameters rounded through float32, i.e. what a save/load cycle yields.
ModelParams quantize_params(const ModelParams& p);

}  // namespace dsr
