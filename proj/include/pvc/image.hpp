#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace pvc {

/// Real-valued image in [0, 1], interleaved HWC.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), data(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * channels + c];
  }
};

/// 8-bit RGB raster, interleaved.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::uint8_t* px(std::size_t x, std::size_t y) { return pixels.data() + 3 * (y * width + x); }
  const std::uint8_t* px(std::size_t x, std::size_t y) const {
    return pixels.data() + 3 * (y * width + x);
  }
};

/// Bilinear resize, half-pixel (align-corners-false) sampling with edge clamping.
Image resize_bilinear(const Image& src, std::size_t height, std::size_t width);

/// 1-D bilinear interpolation weights (out_size x in_size), half-pixel convention.
/// Every row sums to one.
std::vector<std::vector<double>> bilinear_weights(std::size_t in_size, std::size_t out_size);

Image to_real(const RgbImage& img);

/// Deterministic smooth test pattern, values in [0, 1].
Image synthetic_image(std::size_t height, std::size_t width, std::size_t channels,
                      std::uint64_t seed);

// P6 with maxval 255.
std::vector<std::uint8_t> encode_ppm(const RgbImage& img);
// 8-bit RGB PNG, non-interlaced, zlib level 1.
std::vector<std::uint8_t> encode_png(const RgbImage& img);

void write_image(const std::filesystem::path& path, const RgbImage& img);
/// Reads P6 PPM or any PNG libpng understands; alpha is dropped.
RgbImage read_image(const std::filesystem::path& path);

}  // namespace pvc
