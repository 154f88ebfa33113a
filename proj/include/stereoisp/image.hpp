#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stereoisp {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Planar 3 x height x width RGB image with values in [0, 1].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  RgbImage() = default;
  RgbImage(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, fill) {}

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

enum class BayerPattern { rggb };

/// Color index (0 = R, 1 = G, 2 = B) of site (y, x) in an RGGB mosaic.
constexpr int rggb_channel(int y, int x) {
  const bool even_y = y % 2 == 0;
  const bool even_x = x % 2 == 0;
  if (even_y && even_x) return 0;
  if (!even_y && !even_x) return 2;
  return 1;
}

/// Single-channel raw measurement.
struct BayerMosaic {
  int height = 0;
  int width = 0;
  std::vector<float> data;
  BayerPattern pattern = BayerPattern::rggb;

  BayerMosaic() = default;
  BayerMosaic(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Horizontal disparity in pixels plus a per-pixel validity mask.
struct DisparityMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> valid;

  DisparityMap() = default;
  DisparityMap(int h, int w, float fill = 0.0f, bool is_valid = true)
      : height(h),
        width(w),
        values(static_cast<std::size_t>(h) * w, fill),
        valid(static_cast<std::size_t>(h) * w, is_valid ? 1 : 0) {}

  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool is_valid(int y, int x) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
  void set_valid(int y, int x, bool v) { valid[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
};

inline RgbImage crop(const RgbImage& src, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > src.height || x0 + w > src.width) {
    throw ImageError("crop window outside image");
  }
  RgbImage out(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = src.at(c, y0 + y, x0 + x);
  return out;
}

inline BayerMosaic crop(const BayerMosaic& src, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > src.height || x0 + w > src.width) {
    throw ImageError("crop window outside mosaic");
  }
  BayerMosaic out(h, w);
  out.pattern = src.pattern;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = src.at(y0 + y, x0 + x);
  return out;
}

inline DisparityMap crop(const DisparityMap& src, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > src.height || x0 + w > src.width) {
    throw ImageError("crop window outside disparity map");
  }
  DisparityMap out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      out.at(y, x) = src.at(y0 + y, x0 + x);
      out.set_valid(y, x, src.is_valid(y0 + y, x0 + x));
    }
  return out;
}

}  // namespace stereoisp
