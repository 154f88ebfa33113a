#pragma once

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "stereoisp/image.hpp"

namespace stereoisp {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded PNG samples, row-major and interleaved, native endianness.
struct PngData {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;

  std::uint16_t at(int y, int x, int c = 0) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace detail

inline PngData read_png(const std::string& path) {
  detail::FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open '" + path + "'");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("'" + path + "' is not a PNG file");
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, detail::png_error_handler,
                                           detail::png_warning_handler);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngData out;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode '" + path + "': " + error);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(count);
  if (out.bit_depth == 16) {
    for (int y = 0; y < out.height; ++y) {
      const auto* src = reinterpret_cast<const std::uint16_t*>(rows[y]);
      std::copy_n(src, static_cast<std::size_t>(out.width) * out.channels,
                  out.samples.begin() + static_cast<std::size_t>(y) * out.width * out.channels);
    }
  } else {
    for (int y = 0; y < out.height; ++y)
      for (std::size_t i = 0; i < static_cast<std::size_t>(out.width) * out.channels; ++i)
        out.samples[static_cast<std::size_t>(y) * out.width * out.channels + i] = rows[y][i];
  }
  return out;
}

/// channels in {1, 3}; bit_depth in {8, 16}.
inline void write_png(const std::string& path, const PngData& data) {
  if ((data.channels != 1 && data.channels != 3) || (data.bit_depth != 8 && data.bit_depth != 16)) {
    throw IoError("write_png: unsupported layout");
  }
  detail::FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write '" + path + "'");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, detail::png_error_handler,
                                            detail::png_warning_handler);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  const std::size_t stride = static_cast<std::size_t>(data.width) * data.channels;
  std::vector<unsigned char> buffer(stride * data.height * (data.bit_depth / 8));
  if (data.bit_depth == 8) {
    for (std::size_t i = 0; i < data.samples.size(); ++i)
      buffer[i] = static_cast<unsigned char>(data.samples[i]);
  } else {
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      buffer[2 * i] = static_cast<unsigned char>(data.samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<unsigned char>(data.samples[i] & 0xff);
    }
  }
  std::vector<png_bytep> rows(data.height);
  for (int y = 0; y < data.height; ++y) rows[y] = buffer.data() + y * stride * (data.bit_depth / 8);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode '" + path + "': " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, data.width, data.height, data.bit_depth,
               data.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// 8-bit RGB (alpha dropped, gray replicated) scaled by 1/255.
inline RgbImage read_rgb_png(const std::string& path) {
  const PngData png = read_png(path);
  if (png.bit_depth != 8) throw IoError("'" + path + "': expected an 8-bit image");
  RgbImage out(png.height, png.width);
  for (int y = 0; y < png.height; ++y)
    for (int x = 0; x < png.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const int src = png.channels >= 3 ? c : 0;
        out.at(c, y, x) = static_cast<float>(png.at(y, x, src)) / 255.0f;
      }
  return out;
}

/// Clips to [0, 1] and rounds to 8 bits.
inline void write_rgb_png(const std::string& path, const RgbImage& image) {
  PngData png{image.width, image.height, 3, 8, {}};
  png.samples.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::min(1.0f, std::max(0.0f, image.at(c, y, x)));
        png.samples[(static_cast<std::size_t>(y) * image.width + x) * 3 + c] =
            static_cast<std::uint16_t>(std::lround(v * 255.0f));
      }
  write_png(path, png);
}

/// Raw mosaics are stored as 16-bit gray with value = round(x * 16384), so
/// noisy samples up to 4.0 survive without clipping.
inline constexpr double mosaic_png_scale = 16384.0;

inline void write_mosaic_png(const std::string& path, const BayerMosaic& mosaic) {
  PngData png{mosaic.width, mosaic.height, 1, 16, {}};
  png.samples.resize(mosaic.data.size());
  for (std::size_t i = 0; i < mosaic.data.size(); ++i) {
    const double v = std::round(std::max(0.0f, mosaic.data[i]) * mosaic_png_scale);
    png.samples[i] = static_cast<std::uint16_t>(std::min(65535.0, v));
  }
  write_png(path, png);
}

inline BayerMosaic read_mosaic_png(const std::string& path) {
  const PngData png = read_png(path);
  if (png.bit_depth != 16 || png.channels != 1) {
    throw IoError("'" + path + "': expected a 16-bit single-channel mosaic");
  }
  BayerMosaic out(png.height, png.width);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<float>(png.samples[i] / mosaic_png_scale);
  return out;
}

}  // namespace stereoisp
