#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stereoisp/image.hpp"
#include "stereoisp/png_io.hpp"
#include "stereoisp/raw_pipeline.hpp"

namespace stereoisp {

struct StereoSample {
  std::string id;
  RgbImage left;   // primary ground truth
  RgbImage right;
  DisparityMap disparity;  // primary (left) frame
  std::string provenance;  // kitti | drivingstereo | toy
};

enum class DatasetLayout { kitti, drivingstereo };

inline DatasetLayout parse_layout(const std::string& s) {
  if (s == "kitti") return DatasetLayout::kitti;
  if (s == "drivingstereo") return DatasetLayout::drivingstereo;
  throw IoError("unknown dataset layout '" + s + "'");
}

/// KITTI devkit encoding: disparity = stored / 256, stored 0 = invalid.
inline DisparityMap decode_disparity_png(const PngData& png) {
  if (png.bit_depth != 16 || png.channels != 1) {
    throw IoError("disparity PNG must be 16-bit single-channel (got " + std::to_string(png.bit_depth) +
                  "-bit, " + std::to_string(png.channels) + " channel(s))");
  }
  DisparityMap out(png.height, png.width, 0.0f, false);
  for (int y = 0; y < png.height; ++y)
    for (int x = 0; x < png.width; ++x) {
      const std::uint16_t v = png.at(y, x);
      out.at(y, x) = static_cast<float>(v / 256.0);
      out.set_valid(y, x, v != 0);
    }
  return out;
}

/// Inverse of decode_disparity_png. Valid zero disparities are stored as 1
/// (1/256 px) so they stay valid on reload.
inline PngData encode_disparity_png(const DisparityMap& d) {
  PngData png{d.width, d.height, 1, 16, {}};
  png.samples.resize(static_cast<std::size_t>(d.width) * d.height);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      std::uint16_t v = 0;
      if (d.is_valid(y, x)) {
        const double s = std::round(std::max(0.0f, d.at(y, x)) * 256.0);
        v = static_cast<std::uint16_t>(std::clamp(s, 1.0, 65535.0));
      }
      png.samples[static_cast<std::size_t>(y) * d.width + x] = v;
    }
  return png;
}

namespace detail {

inline void crop_to_even(StereoSample& s) {
  const int h = s.left.height - s.left.height % 2;
  const int w = s.left.width - s.left.width % 2;
  if (h == s.left.height && w == s.left.width) return;
  const int y0 = (s.left.height - h) / 2;
  const int x0 = (s.left.width - w) / 2;
  s.left = crop(s.left, y0, x0, h, w);
  s.right = crop(s.right, y0, x0, h, w);
  s.disparity = crop(s.disparity, y0, x0, h, w);
}

}  // namespace detail

struct LoadOptions {
  /// Disparity folder for the KITTI layout (disp_occ_0 or disp_noc_0).
  std::string kitti_disparity_dir = "disp_occ_0";
};

/// KITTI layout: image_2/, image_3/, disp_occ_0/ (only *_10.png frames when
/// present). DrivingStereo layout: left/, right/, disparity/. Counterparts
/// share the file name. Images are center-cropped to even dims.
inline std::vector<StereoSample> load_stereo_dataset(const std::filesystem::path& root,
                                                     DatasetLayout layout,
                                                     const LoadOptions& options = {}) {
  namespace fs = std::filesystem;
  const bool kitti = layout == DatasetLayout::kitti;
  const fs::path left_dir = root / (kitti ? "image_2" : "left");
  const fs::path right_dir = root / (kitti ? "image_3" : "right");
  const fs::path disp_dir = root / (kitti ? options.kitti_disparity_dir : "disparity");
  if (!fs::is_directory(left_dir)) throw IoError("missing directory " + left_dir.string());

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(left_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path().filename());
  std::sort(files.begin(), files.end());
  if (kitti) {
    std::vector<fs::path> tens;
    for (const auto& f : files)
      if (f.stem().string().ends_with("_10")) tens.push_back(f);
    if (!tens.empty()) files = std::move(tens);
  }

  std::vector<StereoSample> out;
  out.reserve(files.size());
  for (const auto& name : files) {
    StereoSample s;
    s.id = name.stem().string();
    s.provenance = kitti ? "kitti" : "drivingstereo";
    for (const auto& dir : {right_dir, disp_dir}) {
      if (!fs::exists(dir / name)) {
        throw IoError("sample '" + s.id + "': missing counterpart " + (dir / name).string());
      }
    }
    s.left = read_rgb_png((left_dir / name).string());
    s.right = read_rgb_png((right_dir / name).string());
    s.disparity = decode_disparity_png(read_png((disp_dir / name).string()));
    if (s.left.height != s.right.height || s.left.width != s.right.width ||
        s.disparity.height != s.left.height || s.disparity.width != s.left.width) {
      throw IoError("sample '" + s.id + "': left/right/disparity sizes differ");
    }
    detail::crop_to_even(s);
    out.push_back(std::move(s));
  }
  return out;
}

/// Writes samples in the KITTI layout: image_2/, image_3/, disp_occ_0/ (all
/// disparities valid) and disp_noc_0/ (validity mask kept).
inline void save_stereo_dataset(const std::filesystem::path& root,
                                const std::vector<StereoSample>& samples) {
  namespace fs = std::filesystem;
  for (const char* d : {"image_2", "image_3", "disp_occ_0", "disp_noc_0"}) fs::create_directories(root / d);
  for (const auto& s : samples) {
    const std::string name = s.id + ".png";
    write_rgb_png((root / "image_2" / name).string(), s.left);
    write_rgb_png((root / "image_3" / name).string(), s.right);
    DisparityMap dense = s.disparity;
    std::fill(dense.valid.begin(), dense.valid.end(), 1);
    write_png((root / "disp_occ_0" / name).string(), encode_disparity_png(dense));
    write_png((root / "disp_noc_0" / name).string(), encode_disparity_png(s.disparity));
  }
}

namespace detail {

// Band-limited procedural texture: base color plus a sum of plane waves.
struct Texture {
  struct Wave {
    double fy, fx, phase;
    double amp[3];
  };
  double base[3];
  double slope_y[3];
  double slope_x[3];
  std::vector<Wave> waves;

  double eval(int c, double y, double x) const {
    double v = base[c] + slope_y[c] * y + slope_x[c] * x;
    for (const auto& w : waves) v += w.amp[c] * std::sin(2 * M_PI * (w.fy * y + w.fx * x) + w.phase);
    return std::clamp(v, 0.0, 1.0);
  }

  static Texture random(std::mt19937_64& rng, int wave_count, double min_period, double max_period,
                        double amp_lo, double amp_hi, double slope) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Texture t;
    for (int c = 0; c < 3; ++c) {
      t.base[c] = 0.25 + 0.5 * u(rng);
      t.slope_y[c] = slope * (2 * u(rng) - 1);
      t.slope_x[c] = slope * (2 * u(rng) - 1);
    }
    for (int k = 0; k < wave_count; ++k) {
      Wave w;
      const double period = min_period + (max_period - min_period) * u(rng);
      const double angle = M_PI * u(rng);
      w.fy = std::sin(angle) / period;
      w.fx = std::cos(angle) / period;
      w.phase = 2 * M_PI * u(rng);
      const double a = amp_lo + (amp_hi - amp_lo) * u(rng);
      for (int c = 0; c < 3; ++c) w.amp[c] = a * (0.5 + u(rng));
      t.waves.push_back(w);
    }
    return t;
  }
};

struct Layer {
  int y0, x0, h, w;  // footprint in the left (primary) frame
  int disparity;
  Texture texture;
  bool background = false;

  bool covers_left(int y, int x) const {
    return background || (y >= y0 && y < y0 + h && x >= x0 && x < x0 + w);
  }
  bool covers_right(int y, int xr) const { return covers_left(y, xr + disparity); }
};

}  // namespace detail

struct ToyDatasetOptions {
  int count = 200;
  int height = 64;
  int width = 128;
  std::uint64_t seed = 1;
  int max_disp = 16;
};

/// Layered synthetic stereo scenes with exact dense disparity. Each scene is
/// a textured background at even disparity plus 1-3 textured rectangles at
/// larger even disparities; the right view is rendered with the nearer layer
/// winning. Left pixels that are hidden or out of frame in the right view are
/// marked invalid (disparity values stay dense).
inline std::vector<StereoSample> generate_toy_dataset(const ToyDatasetOptions& opt) {
  const int p = opt.height;
  const int r = opt.width;
  if (opt.count < 1) throw ImageError("toy dataset: count must be >= 1");
  if (p < 8 || r < 8 || p % 2 != 0 || r % 2 != 0) {
    throw ImageError("toy dataset: size must be even and >= 8");
  }
  if (opt.max_disp < 4 || opt.max_disp % 2 != 0 || opt.max_disp >= r / 4) {
    throw ImageError("toy dataset: max_disp must be even, >= 4 and < width/4");
  }

  std::vector<StereoSample> out;
  out.reserve(opt.count);
  for (int index = 0; index < opt.count; ++index) {
    std::mt19937_64 rng(derive_seed({opt.seed, static_cast<std::uint64_t>(index), 0x7079ULL}));
    auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto even_in = [&](int lo, int hi) { return 2 * uniform_int((lo + 1) / 2, hi / 2); };

    std::vector<detail::Layer> layers;
    detail::Layer bg{0, 0, p, r, even_in(opt.max_disp / 4, opt.max_disp / 2),
                     detail::Texture::random(rng, 6, 4.0, 12.0, 0.04, 0.12, 0.002), true};
    layers.push_back(bg);
    const int rects = uniform_int(1, 3);
    for (int k = 0; k < rects; ++k) {
      detail::Layer l;
      l.h = uniform_int(p / 4, p / 2);
      l.w = uniform_int(r / 8, r / 4);
      l.y0 = uniform_int(0, p - l.h);
      l.x0 = uniform_int(0, r - l.w);
      l.disparity = even_in(bg.disparity + 2, opt.max_disp);
      l.texture = detail::Texture::random(rng, 4, 3.0, 8.0, 0.06, 0.16, 0.0);
      layers.push_back(l);
    }
    // Depth order: farthest first; ties keep generation order.
    std::stable_sort(layers.begin() + 1, layers.end(),
                     [](const auto& a, const auto& b) { return a.disparity < b.disparity; });

    auto top_left = [&](int y, int x) {
      for (int k = static_cast<int>(layers.size()) - 1; k >= 0; --k)
        if (layers[k].covers_left(y, x)) return k;
      return 0;
    };
    auto top_right = [&](int y, int xr) {
      for (int k = static_cast<int>(layers.size()) - 1; k >= 0; --k)
        if (layers[k].covers_right(y, xr)) return k;
      return 0;
    };

    StereoSample s;
    std::ostringstream id;
    id << std::setw(6) << std::setfill('0') << index;
    s.id = id.str();
    s.provenance = "toy";
    s.left = RgbImage(p, r);
    s.right = RgbImage(p, r);
    s.disparity = DisparityMap(p, r, 0.0f, true);
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < r; ++x) {
        const int kl = top_left(y, x);
        const auto& ll = layers[kl];
        for (int c = 0; c < 3; ++c) s.left.at(c, y, x) = static_cast<float>(ll.texture.eval(c, y, x));
        s.disparity.at(y, x) = static_cast<float>(ll.disparity);
        const int xr = x - ll.disparity;
        s.disparity.set_valid(y, x, xr >= 0 && top_right(y, xr) == kl);

        const auto& lr = layers[top_right(y, x)];
        for (int c = 0; c < 3; ++c)
          s.right.at(c, y, x) = static_cast<float>(lr.texture.eval(c, y, x + lr.disparity));
      }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace stereoisp
