#include "cbmrag/service/heatmap.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cbmrag/error.hpp"

namespace cbmrag::service {

namespace {

struct AxisSample {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

AxisSample sample_axis(std::size_t out_index, std::size_t out_size, std::size_t grid_size) {
  double g = (static_cast<double>(out_index) + 0.5) * static_cast<double>(grid_size) /
                 static_cast<double>(out_size) -
             0.5;
  g = std::clamp(g, 0.0, static_cast<double>(grid_size - 1));
  const auto lo = static_cast<std::size_t>(std::floor(g));
  const auto hi = std::min(lo + 1, grid_size - 1);
  return {lo, hi, g - static_cast<double>(lo)};
}

}  // namespace

GrayImage render_heatmap(const cbm::SaliencyMap& map, std::size_t width, std::size_t height) {
  if (width < 1 || height < 1 || width > kMaxHeatmapSide || height > kMaxHeatmapSide) {
    throw Error(Errc::invalid_argument, "heatmap size must be between 1 and " +
                                            std::to_string(kMaxHeatmapSide));
  }
  if (map.grid_h == 0 || map.grid_w == 0 || map.grid.size() != map.grid_h * map.grid_w) {
    throw Error(Errc::invalid_argument, "saliency map grid is malformed");
  }
  GrayImage img{width, height, std::vector<std::uint8_t>(width * height)};
  std::vector<AxisSample> xs(width);
  for (std::size_t x = 0; x < width; ++x) xs[x] = sample_axis(x, width, map.grid_w);
  for (std::size_t y = 0; y < height; ++y) {
    const auto sy = sample_axis(y, height, map.grid_h);
    for (std::size_t x = 0; x < width; ++x) {
      const auto& sx = xs[x];
      const double top = map.at(sy.lo, sx.lo) * (1.0 - sx.frac) + map.at(sy.lo, sx.hi) * sx.frac;
      const double bottom =
          map.at(sy.hi, sx.lo) * (1.0 - sx.frac) + map.at(sy.hi, sx.hi) * sx.frac;
      const double v = std::clamp(top * (1.0 - sy.frac) + bottom * sy.frac, 0.0, 1.0);
      img.pixels[y * width + x] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  }
  return img;
}

namespace {

void write_to_string(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void flush_noop(png_structp) {}

struct ReadCursor {
  const std::string* data;
  std::size_t offset;
};

void read_from_string(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->data->size()) png_error(png, "truncated PNG");
  std::memcpy(out, cur->data->data() + cur->offset, length);
  cur->offset += length;
}

}  // namespace

std::string encode_png(const GrayImage& image) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encoding failed");
  }
  png_set_write_fn(png, &out, write_to_string, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * image.width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

GrayImage decode_png(const std::string& data) {
  if (data.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(data.data()), 0, 8) != 0) {
    throw Error(Errc::invalid_argument, "not a PNG image");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  GrayImage img;
  ReadCursor cursor{&data, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::invalid_argument, "PNG decoding failed");
  }
  png_set_read_fn(png, &cursor, read_from_string);
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_error(png, "expected 8-bit grayscale");
  }
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.pixels.resize(img.width * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    png_read_row(png, img.pixels.data() + y * img.width, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace cbmrag::service
