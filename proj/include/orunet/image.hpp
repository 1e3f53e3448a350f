#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "orunet/tensor.hpp"

namespace orunet::img {

/// 8-bit interleaved RGB image, row-major (h, w, 3).
struct ImageU8 {
  int64_t height = 0, width = 0;
  std::vector<uint8_t> pixels;

  ImageU8() = default;
  ImageU8(int64_t h, int64_t w) : height(h), width(w), pixels(static_cast<size_t>(h * w * 3), 0) {}
  uint8_t& at(int64_t y, int64_t x, int64_t c) {
    return pixels[static_cast<size_t>((y * width + x) * 3 + c)];
  }
  uint8_t at(int64_t y, int64_t x, int64_t c) const {
    return pixels[static_cast<size_t>((y * width + x) * 3 + c)];
  }
};

/// 8-bit single-channel label image (instance IDs or {0, 255} binaries).
struct MaskU8 {
  int64_t height = 0, width = 0;
  std::vector<uint8_t> labels;

  MaskU8() = default;
  MaskU8(int64_t h, int64_t w) : height(h), width(w), labels(static_cast<size_t>(h * w), 0) {}
  uint8_t& at(int64_t y, int64_t x) { return labels[static_cast<size_t>(y * width + x)]; }
  uint8_t at(int64_t y, int64_t x) const { return labels[static_cast<size_t>(y * width + x)]; }
};

ImageU8 read_image(const std::filesystem::path& path);
MaskU8 read_mask(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageU8& image);
void write_mask(const std::filesystem::path& path, const MaskU8& mask);

}  // namespace orunet::img
