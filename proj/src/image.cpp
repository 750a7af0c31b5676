#include "pvc/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "pvc/error.hpp"
#include "pvc/random.hpp"

namespace pvc {

RgbImage::RgbImage(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width(w), height(h), pixels(w * h * 3) {
  for (std::size_t i = 0; i < w * h; ++i) {
    pixels[3 * i] = r;
    pixels[3 * i + 1] = g;
    pixels[3 * i + 2] = b;
  }
}

std::vector<std::vector<double>> bilinear_weights(std::size_t in_size, std::size_t out_size) {
  if (in_size == 0 || out_size == 0) throw ValidationError("bilinear_weights: zero size");
  std::vector<std::vector<double>> w(out_size, std::vector<double>(in_size, 0.0));
  if (in_size == out_size) {
    for (std::size_t i = 0; i < in_size; ++i) w[i][i] = 1.0;
    return w;
  }
  const double ratio = static_cast<double>(in_size) / static_cast<double>(out_size);
  const double last = static_cast<double>(in_size - 1);
  for (std::size_t o = 0; o < out_size; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, last);
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const std::size_t i1 = std::min(i0 + 1, in_size - 1);
    const double frac = src - static_cast<double>(i0);
    w[o][i0] += 1.0 - frac;
    w[o][i1] += frac;
  }
  return w;
}

Image resize_bilinear(const Image& src, std::size_t height, std::size_t width) {
  if (src.height == 0 || src.width == 0 || height == 0 || width == 0) {
    throw ValidationError("resize_bilinear: zero-sized image");
  }
  if (height == src.height && width == src.width) return src;
  const auto wy = bilinear_weights(src.height, height);
  const auto wx = bilinear_weights(src.width, width);
  const std::size_t c = src.channels;
  // Rows first, then columns.
  Image tmp(height, src.width, c);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t sy = 0; sy < src.height; ++sy) {
      const double a = wy[y][sy];
      if (a == 0.0) continue;
      for (std::size_t x = 0; x < src.width * c; ++x) {
        tmp.data[y * src.width * c + x] += a * src.data[sy * src.width * c + x];
      }
    }
  }
  Image out(height, width, c);
  for (std::size_t x = 0; x < width; ++x) {
    for (std::size_t sx = 0; sx < src.width; ++sx) {
      const double a = wx[x][sx];
      if (a == 0.0) continue;
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t ch = 0; ch < c; ++ch) out.at(y, x, ch) += a * tmp.at(y, sx, ch);
      }
    }
  }
  return out;
}

Image to_real(const RgbImage& img) {
  Image out(img.height, img.width, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.data[i] = img.pixels[i] / 255.0;
  return out;
}

Image synthetic_image(std::size_t height, std::size_t width, std::size_t channels,
                      std::uint64_t seed) {
  Rng rng(seed);
  struct Wave {
    double fy, fx, phase, amp;
  };
  std::vector<Wave> waves;
  for (std::size_t c = 0; c < channels; ++c) {
    for (int k = 0; k < 3; ++k) {
      waves.push_back({rng.uniform(0.002, 0.05), rng.uniform(0.002, 0.05), rng.uniform(0.0, 6.283),
                       rng.uniform(0.05, 0.15)});
    }
  }
  Image img(height, width, channels);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        double v = 0.5;
        for (int k = 0; k < 3; ++k) {
          const Wave& w = waves[c * 3 + k];
          v += w.amp * std::sin(w.fy * static_cast<double>(y) + w.fx * static_cast<double>(x) + w.phase);
        }
        img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

namespace {

RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };
  if (next_token() != "P6") throw ValidationError("ppm: only binary P6 is supported");
  const std::size_t w = std::stoul(next_token());
  const std::size_t h = std::stoul(next_token());
  if (next_token() != "255") throw ValidationError("ppm: maxval must be 255");
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos + w * h * 3) throw ValidationError("ppm: truncated raster");
  RgbImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + w * h * 3));
  return img;
}

RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw ValidationError(std::string("png: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  RgbImage img(png.width, png.height, 0, 0, 0);
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw ValidationError("png: " + msg);
  }
  return img;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  // Classic write API so zlib runs once; the simplified API's memory writer
  // compresses twice (once to size the buffer).
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: cannot create info struct");
  }
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: encode failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + n);
      },
      nullptr);
  // Flat-colour rasters: fast deflate loses little and keeps probe generation cheap.
  png_set_compression_level(png, 1);
  png_set_filter(png, 0, PNG_FILTER_UP);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.pixels.data() + 3 * img.width * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_image(const std::filesystem::path& path, const RgbImage& img) {
  const auto ext = path.extension().string();
  const auto bytes = ext == ".ppm" ? encode_ppm(img) : encode_png(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
}

RgbImage read_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  return decode_png(bytes);
}

}  // namespace pvc
