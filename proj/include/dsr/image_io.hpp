// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "dsr/tensor.hpp"

namespace dsr {

// PFM: "Pf" (1 channel) or "PF" (3 channel), negative scale marks little
// endian, scanlines stored bottom to top. Samples are written as 32-bit
// floats, so the roundtrip is bit-exact for float-representable tensors.
void write_pfm(const std::filesystem::path& path, const Tensor& t);
Tensor read_pfm(const std::filesystem::path& path);
std::vector<unsigned char> encode_pfm(const Tensor& t);

// 8-bit PNG (gray or RGB), values clipped to [0,1] and rounded.
void write_png(const std::filesystem::path& path, const Tensor& t);
/// Reads gray, gray+alpha, RGB or RGBA PNG; alpha is dropped.
Tensor read_png(const std::filesystem::path& path);

/// Dispatches on extension (.pfm / .png).
Tensor read_image(const std::filesystem::path& path);

/// Values rounded through float32, matching what write_pfm stores.
Tensor quantize_f32(const Tensor& t);

// BT.601 full-range luma/chroma.
Tensor rgb_to_ycbcr(const Tensor& rgb);
Tensor ycbcr_to_rgb(const Tensor& ycc);
Tensor to_luma(const Tensor& img);

}  // namespace dsr
