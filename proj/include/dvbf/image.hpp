#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace dvbf {

// Row-major grayscale raster with values nominally in [0, 1].
struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h, 0.0f) {}
  float& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  float at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }

  // Copies a w x h tile with its top-left corner at (row, col).
  void paste(std::span<const float> tile, std::size_t w, std::size_t h, std::size_t row, std::size_t col);
};

// Binary P5 graymap; values are clamped to [0, 1] and scaled to 0..255.
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);

}  // namespace dvbf
