#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace heviper {

/// Interleaved H x W x C f32 raster. 8-bit sources are scaled to [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c) : width(w), height(h), channels(c), pixels(w * h * c, 0.0f) {}

  float& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  float at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
};

/// Binary PGM (P5) / PPM (P6) with maxval 255, or a raw f32 grid
/// ("HEVF", u32 version, u32 height, u32 width, u32 channels, then f32 HWC).
Image load_image(const std::filesystem::path& path);

/// Writes P5 for one channel, P6 for three. Values are clamped to [0, 1] and
/// rounded to 8 bits.
void save_netpbm(const std::filesystem::path& path, const Image& image);

void save_raw_f32(const std::filesystem::path& path, const Image& image);

}  // namespace heviper
