#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbmrag/cbm/bottleneck.hpp"

namespace cbmrag::service {

inline constexpr std::size_t kMaxHeatmapSide = 4096;

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  bool operator==(const GrayImage&) const = default;
};

// Bilinear upsampling with half-pixel centres: output pixel (x, y) samples the
// grid at ((x + 0.5) * grid_w / width - 0.5, (y + 0.5) * grid_h / height - 0.5),
// clamped to the grid. Pixel value = round(255 * v).
// Errors: invalid_argument unless 1 <= width, height <= kMaxHeatmapSide.
GrayImage render_heatmap(const cbm::SaliencyMap& map, std::size_t width, std::size_t height);

// 8-bit grayscale PNG.
std::string encode_png(const GrayImage& image);
// Decodes an 8-bit grayscale PNG. Errors: invalid_argument.
GrayImage decode_png(const std::string& png);

}  // namespace cbmrag::service
