#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stereoisp/image.hpp"

namespace stereoisp {

/// raw: linear interpolation on the flat mosaic. packed: each of the four
/// Bayer planes is warped at half resolution with disparity / 2.
enum class WarpMode { raw, packed };

/// Value written where no warped sample is available.
enum class FillPolicy { primary, zero };

inline WarpMode parse_warp_mode(const std::string& s) {
  if (s == "raw") return WarpMode::raw;
  if (s == "packed") return WarpMode::packed;
  throw ImageError("unknown warp mode '" + s + "'");
}

inline FillPolicy parse_fill_policy(const std::string& s) {
  if (s == "primary") return FillPolicy::primary;
  if (s == "zero") return FillPolicy::zero;
  throw ImageError("unknown fill policy '" + s + "'");
}

inline std::string to_string(WarpMode m) { return m == WarpMode::raw ? "raw" : "packed"; }
inline std::string to_string(FillPolicy f) { return f == FillPolicy::primary ? "primary" : "zero"; }

struct WarpResult {
  BayerMosaic warped;
  std::vector<std::uint8_t> coverage;
  FillPolicy fill = FillPolicy::primary;

  bool covered(int y, int x) const {
    return coverage[static_cast<std::size_t>(y) * warped.width + x] != 0;
  }
};

namespace detail {

// Linear sample of row[0..width) at position xs; nullopt outside [0, width-1].
inline std::optional<double> sample_row(const float* row, int width, double xs) {
  if (!(xs >= 0.0) || xs > static_cast<double>(width - 1)) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(xs));
  const double t = xs - x0;
  if (x0 >= width - 1) return static_cast<double>(row[width - 1]);
  return (1.0 - t) * row[x0] + t * row[x0 + 1];
}

}  // namespace detail

/// Backward warp of the secondary (right) mosaic into the primary (left)
/// frame: W(y, x) = S(y, x - D(y, x)).
inline WarpResult warp_backward(const BayerMosaic& secondary, const DisparityMap& disparity,
                                WarpMode mode = WarpMode::raw,
                                FillPolicy fill = FillPolicy::primary,
                                const BayerMosaic* primary = nullptr) {
  const int h = secondary.height;
  const int w = secondary.width;
  if (disparity.height != h || disparity.width != w) {
    throw ImageError("warp_backward: disparity " + std::to_string(disparity.height) + "x" +
                     std::to_string(disparity.width) + " does not match secondary " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  if (fill == FillPolicy::primary) {
    if (primary == nullptr) throw ImageError("warp_backward: fill=primary requires the primary mosaic");
    if (primary->height != h || primary->width != w) {
      throw ImageError("warp_backward: primary mosaic size does not match secondary");
    }
  }
  if (mode == WarpMode::packed && (h % 2 != 0 || w % 2 != 0)) {
    throw ImageError("warp_backward: packed mode requires even dims");
  }

  WarpResult result;
  result.fill = fill;
  result.warped = BayerMosaic(h, w);
  result.warped.pattern = secondary.pattern;
  result.coverage.assign(static_cast<std::size_t>(h) * w, 0);
  auto fill_value = [&](int y, int x) {
    return fill == FillPolicy::primary ? primary->at(y, x) : 0.0f;
  };

  if (mode == WarpMode::raw) {
    for (int y = 0; y < h; ++y) {
      const float* row = secondary.data.data() + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        std::optional<double> v;
        if (disparity.is_valid(y, x)) v = detail::sample_row(row, w, x - static_cast<double>(disparity.at(y, x)));
        if (v) {
          result.warped.at(y, x) = static_cast<float>(*v);
          result.coverage[static_cast<std::size_t>(y) * w + x] = 1;
        } else {
          result.warped.at(y, x) = fill_value(y, x);
        }
      }
    }
    return result;
  }

  const int h2 = h / 2;
  const int w2 = w / 2;
  // planes[dy * 2 + dx] is the half-resolution Bayer plane at offset (dy, dx).
  std::vector<std::vector<float>> planes(4, std::vector<float>(static_cast<std::size_t>(h2) * w2));
  for (int yy = 0; yy < h2; ++yy)
    for (int x2 = 0; x2 < w2; ++x2)
      for (int k = 0; k < 4; ++k) planes[k][yy * w2 + x2] = secondary.at(2 * yy + k / 2, 2 * x2 + k % 2);
  for (int yy = 0; yy < h2; ++yy) {
    for (int x2 = 0; x2 < w2; ++x2) {
      const int y = 2 * yy;
      const int x = 2 * x2;
      const bool ok = disparity.is_valid(y, x);
      const double xs = x2 - static_cast<double>(disparity.at(y, x)) / 2.0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          std::optional<double> v;
          if (ok) v = detail::sample_row(planes[dy * 2 + dx].data() + static_cast<std::size_t>(yy) * w2, w2, xs);
          if (v) {
            result.warped.at(y + dy, x + dx) = static_cast<float>(*v);
            result.coverage[static_cast<std::size_t>(y + dy) * w + x + dx] = 1;
          } else {
            result.warped.at(y + dy, x + dx) = fill_value(y + dy, x + dx);
          }
        }
    }
  }
  return result;
}

/// SAD block matching on the mean of the two packed green planes. max_disp
/// and block are in half-resolution pixels; the returned disparity is in
/// full-resolution pixels (2 x the half-res argmin), nearest-neighbour
/// upsampled. Ties go to the smaller disparity. The block/2 border and the
/// leftmost max_disp half-res columns (incomplete search range) are invalid.
inline DisparityMap estimate_disparity_blockmatch(const BayerMosaic& left, const BayerMosaic& right,
                                                  int max_disp, int block) {
  if (left.height != right.height || left.width != right.width) {
    throw ImageError("blockmatch: left/right size mismatch");
  }
  if (left.height % 2 != 0 || left.width % 2 != 0) throw ImageError("blockmatch: dims must be even");
  if (max_disp < 1) throw ImageError("blockmatch: max_disp must be >= 1");
  if (block < 3 || block % 2 == 0) throw ImageError("blockmatch: block must be odd and >= 3");
  if (max_disp >= left.width / 2) {
    throw ImageError("blockmatch: max_disp " + std::to_string(max_disp) +
                     " must be smaller than half the width " + std::to_string(left.width / 2));
  }

  const int h2 = left.height / 2;
  const int w2 = left.width / 2;
  auto green = [&](const BayerMosaic& m) {
    std::vector<double> g(static_cast<std::size_t>(h2) * w2);
    for (int y = 0; y < h2; ++y)
      for (int x = 0; x < w2; ++x) g[y * w2 + x] = 0.5 * (m.at(2 * y, 2 * x + 1) + m.at(2 * y + 1, 2 * x));
    return g;
  };
  const auto gl = green(left);
  const auto gr = green(right);
  const int half = block / 2;

  std::vector<double> best_cost(static_cast<std::size_t>(h2) * w2, std::numeric_limits<double>::infinity());
  std::vector<int> best_disp(static_cast<std::size_t>(h2) * w2, 0);
  // Integral image of |L(y,x) - R(y,x-d)| per candidate d.
  std::vector<double> integral(static_cast<std::size_t>(h2 + 1) * (w2 + 1));
  for (int d = 0; d <= max_disp; ++d) {
    std::fill(integral.begin(), integral.end(), 0.0);
    for (int y = 0; y < h2; ++y) {
      double row = 0;
      for (int x = 0; x < w2; ++x) {
        const double cost = x - d >= 0 ? std::abs(gl[y * w2 + x] - gr[y * w2 + x - d]) : 0.0;
        row += cost;
        integral[(y + 1) * (w2 + 1) + x + 1] = integral[y * (w2 + 1) + x + 1] + row;
      }
    }
    for (int y = half; y < h2 - half; ++y)
      for (int x = half + max_disp; x < w2 - half; ++x) {
        const int y0 = y - half, y1 = y + half + 1, x0 = x - half, x1 = x + half + 1;
        const double sad = integral[y1 * (w2 + 1) + x1] - integral[y0 * (w2 + 1) + x1] -
                           integral[y1 * (w2 + 1) + x0] + integral[y0 * (w2 + 1) + x0];
        auto& best = best_cost[y * w2 + x];
        if (sad < best) {
          best = sad;
          best_disp[y * w2 + x] = d;
        }
      }
  }

  DisparityMap out(left.height, left.width, 0.0f, false);
  for (int y = 0; y < h2; ++y)
    for (int x = 0; x < w2; ++x) {
      const bool ok = y >= half && y < h2 - half && x >= half + max_disp && x < w2 - half;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          out.at(2 * y + dy, 2 * x + dx) = ok ? 2.0f * best_disp[y * w2 + x] : 0.0f;
          out.set_valid(2 * y + dy, 2 * x + dx, ok);
        }
    }
  return out;
}

}  // namespace stereoisp
