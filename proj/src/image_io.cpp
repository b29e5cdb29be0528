// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace dsr {
namespace {

static_assert(std::endian::native == std::endian::little,
              "PFM writer assumes a little-endian host");

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
  return f;
}

std::string next_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

std::vector<unsigned char> encode_pfm(const Tensor& t) {
  DSR_REQUIRE(t.channels() == 1 || t.channels() == 3, "PFM supports 1 or 3 channels");
  std::ostringstream hdr;
  hdr << (t.channels() == 1 ? "Pf" : "PF") << '\n'
      << t.width() << ' ' << t.height() << '\n'
      << "-1.0\n";
  const std::string h = hdr.str();
  std::vector<unsigned char> bytes(h.begin(), h.end());
  const std::size_t row = static_cast<std::size_t>(t.width()) * t.channels();
  bytes.reserve(bytes.size() + row * t.height() * 4);
  for (int r = t.height() - 1; r >= 0; --r) {
    const double* src = t.pixel(r, 0);
    for (std::size_t i = 0; i < row; ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(src[i]));
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
  }
  return bytes;
}

void write_pfm(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_pfm(t);
  auto f = open_file(path, "wb");
  if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
    throw IoError("short write to '" + path.string() + "'");
}

Tensor read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::string magic = next_token(in);
  int channels = 0;
  if (magic == "Pf")
    channels = 1;
  else if (magic == "PF")
    channels = 3;
  else
    throw IoError("'" + path.string() + "' is not a PFM file");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    scale = std::stod(next_token(in));
  } catch (const std::exception&) {
    throw IoError("malformed PFM header in '" + path.string() + "'");
  }
  if (w <= 0 || h <= 0 || scale == 0.0)
    throw IoError("malformed PFM header in '" + path.string() + "'");
  const bool little = scale < 0.0;
  const std::size_t row = static_cast<std::size_t>(w) * channels;
  std::vector<unsigned char> raw(row * h * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw IoError("truncated PFM data in '" + path.string() + "'");
  Tensor t(h, w, channels);
  std::size_t k = 0;
  for (int r = h - 1; r >= 0; --r) {
    double* dst = t.pixel(r, 0);
    for (std::size_t i = 0; i < row; ++i, k += 4) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        const int shift = little ? 8 * b : 8 * (3 - b);
        bits |= static_cast<std::uint32_t>(raw[k + b]) << shift;
      }
      dst[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return t;
}

void write_png(const std::filesystem::path& path, const Tensor& t) {
  DSR_REQUIRE(t.channels() == 1 || t.channels() == 3, "PNG writer supports 1 or 3 channels");
  auto f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_byte> rows(static_cast<std::size_t>(t.width()) * t.channels() * t.height());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = std::clamp(t.data()[i], 0.0, 1.0);
    rows[i] = static_cast<png_byte>(std::lround(v * 255.0));
  }
  std::vector<png_bytep> ptrs(t.height());
  for (int r = 0; r < t.height(); ++r)
    ptrs[r] = rows.data() + static_cast<std::size_t>(r) * t.width() * t.channels();
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, t.width(), t.height(), 8,
               t.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor read_png(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError("'" + path.string() + "' is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_byte> buf;
  std::vector<png_bytep> ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failed reading '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int c = png_get_channels(png, info);
  buf.resize(static_cast<std::size_t>(w) * h * c);
  ptrs.resize(h);
  for (int r = 0; r < h; ++r) ptrs[r] = buf.data() + static_cast<std::size_t>(r) * w * c;
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (c != 1 && c != 3) throw IoError("unsupported PNG channel layout in '" + path.string() + "'");
  Tensor t(h, w, c);
  for (std::size_t i = 0; i < buf.size(); ++i) t.data()[i] = buf[i] / 255.0;
  return t;
}

Tensor read_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".png") return read_png(path);
  throw IoError("unsupported image extension '" + ext + "' for '" + path.string() + "'");
}

Tensor quantize_f32(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

Tensor rgb_to_ycbcr(const Tensor& rgb) {
  DSR_REQUIRE(rgb.channels() == 3, "rgb_to_ycbcr expects 3 channels");
  Tensor out(rgb.height(), rgb.width(), 3);
  for (int r = 0; r < rgb.height(); ++r)
    for (int q = 0; q < rgb.width(); ++q) {
      const double* s = rgb.pixel(r, q);
      double* d = out.pixel(r, q);
      d[0] = 0.299 * s[0] + 0.587 * s[1] + 0.114 * s[2];
      d[1] = 0.5 + (s[2] - d[0]) * 0.564;
      d[2] = 0.5 + (s[0] - d[0]) * 0.713;
    }
  return out;
}

Tensor ycbcr_to_rgb(const Tensor& ycc) {
  DSR_REQUIRE(ycc.channels() == 3, "ycbcr_to_rgb expects 3 channels");
  Tensor out(ycc.height(), ycc.width(), 3);
  for (int r = 0; r < ycc.height(); ++r)
    for (int q = 0; q < ycc.width(); ++q) {
      const double* s = ycc.pixel(r, q);
      double* d = out.pixel(r, q);
      const double y = s[0];
      const double cb = s[1] - 0.5;
      const double cr = s[2] - 0.5;
      d[0] = y + cr / 0.713;
      d[2] = y + cb / 0.564;
      d[1] = (y - 0.299 * d[0] - 0.114 * d[2]) / 0.587;
    }
  return out;
}

Tensor to_luma(const Tensor& img) {
  if (img.channels() == 1) return img;
  return rgb_to_ycbcr(img).channel_slice(0, 1);
}

}  // namespace dsr
