#include "dvbf/image.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "dvbf/binary_io.hpp"
#include "dvbf/errors.hpp"

namespace dvbf {

void GrayImage::paste(std::span<const float> tile, std::size_t w, std::size_t h, std::size_t row, std::size_t col) {
  if (tile.size() != w * h || row + h > height || col + w > width) {
    throw ContractError("GrayImage::paste: tile does not fit");
  }
  for (std::size_t r = 0; r < h; ++r) std::copy_n(tile.begin() + static_cast<std::ptrdiff_t>(r * w), w, &at(row + r, col));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.pixels.size());
  for (float v : img.pixels) {
    const float c = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0f)));
  }
  return out;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) { io::write_file(path, encode_pgm(img)); }

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  // Header: magic, width, height, maxval, each separated by one whitespace run.
  std::size_t pos = 0;
  const auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P5") throw IoError("pgm: bad magic");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw IoError("pgm: malformed header");
  }
  if (maxval != 255) throw IoError("pgm: only 8-bit graymaps are supported");
  ++pos;
  if (bytes.size() - std::min(pos, bytes.size()) != w * h) throw IoError("pgm: pixel data length mismatch");
  GrayImage img(w, h);
  for (std::size_t i = 0; i < w * h; ++i) img.pixels[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
  return img;
}

}  // namespace dvbf
