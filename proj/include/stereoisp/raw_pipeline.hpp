#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "stereoisp/image.hpp"
#include "stereoisp/ops.hpp"
#include "stereoisp/tensor.hpp"

namespace stereoisp {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (const auto p : parts) h = mix_seed(h ^ mix_seed(p));
  return h;
}

inline BayerMosaic bayer_mosaic(const RgbImage& image, BayerPattern pattern = BayerPattern::rggb) {
  if (image.height % 2 != 0 || image.width % 2 != 0) {
    throw ImageError("bayer_mosaic: image dims " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) + " must be even");
  }
  BayerMosaic out(image.height, image.width);
  out.pattern = pattern;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) out.at(y, x) = image.at(rggb_channel(y, x), y, x);
  return out;
}

/// Each raw sample placed in its own color channel, zeros elsewhere.
inline RgbImage mask_mosaic(const BayerMosaic& mosaic) {
  RgbImage out(mosaic.height, mosaic.width, 0.0f);
  for (int y = 0; y < mosaic.height; ++y)
    for (int x = 0; x < mosaic.width; ++x) out.at(rggb_channel(y, x), y, x) = mosaic.at(y, x);
  return out;
}

template <typename T>
Tensor<T> mosaics_to_tensor(const std::vector<const BayerMosaic*>& mosaics,
                            bool requires_grad = false) {
  if (mosaics.empty()) throw ImageError("mosaics_to_tensor: empty batch");
  const int h = mosaics.front()->height;
  const int w = mosaics.front()->width;
  std::vector<T> values;
  values.reserve(mosaics.size() * h * w);
  for (const auto* m : mosaics) {
    if (m->height != h || m->width != w) throw ImageError("mosaics_to_tensor: size mismatch in batch");
    values.insert(values.end(), m->data.begin(), m->data.end());
  }
  return Tensor<T>::from({static_cast<std::int64_t>(mosaics.size()), 1, h, w}, std::move(values),
                         requires_grad);
}

template <typename T>
Tensor<T> mosaic_to_tensor(const BayerMosaic& mosaic, bool requires_grad = false) {
  return mosaics_to_tensor<T>({&mosaic}, requires_grad);
}

template <typename T>
Tensor<T> images_to_tensor(const std::vector<const RgbImage*>& images) {
  if (images.empty()) throw ImageError("images_to_tensor: empty batch");
  const int h = images.front()->height;
  const int w = images.front()->width;
  std::vector<T> values;
  values.reserve(images.size() * 3 * h * w);
  for (const auto* im : images) {
    if (im->height != h || im->width != w) throw ImageError("images_to_tensor: size mismatch in batch");
    values.insert(values.end(), im->data.begin(), im->data.end());
  }
  return Tensor<T>::from({static_cast<std::int64_t>(images.size()), 3, h, w}, std::move(values));
}

template <typename T>
RgbImage tensor_to_image(const Tensor<T>& t, std::int64_t index = 0) {
  const Shape& s = t.shape();
  if (s.c != 3 || index < 0 || index >= s.n) throw ImageError("tensor_to_image: expected N x 3 x H x W");
  RgbImage out(static_cast<int>(s.h), static_cast<int>(s.w));
  const auto v = t.values();
  const std::int64_t base = index * 3 * s.plane();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<float>(v[base + i]);
  return out;
}

/// 4 x (p/2) x (r/2) packing; channel order (R, G1, G2, B) for RGGB.
template <typename T>
Tensor<T> pack_mosaic(const BayerMosaic& mosaic) {
  if (mosaic.height % 2 != 0 || mosaic.width % 2 != 0) {
    throw ImageError("pack_mosaic: mosaic dims must be even");
  }
  return pixel_unshuffle(mosaic_to_tensor<T>(mosaic), 2);
}

struct NoiseModel {
  enum class Kind { gaussian, poisson, poisson_gaussian };
  Kind kind = Kind::poisson;
  double photons = 10.0;  // lambda: photons at full scale
  double sigma = 0.0;     // gaussian std in normalized units

  static NoiseModel gaussian(double sigma) { return {Kind::gaussian, 1.0, sigma}; }
  static NoiseModel poisson(double photons) { return {Kind::poisson, photons, 0.0}; }
  static NoiseModel poisson_gaussian(double photons, double sigma) {
    return {Kind::poisson_gaussian, photons, sigma};
  }

  void validate() const {
    if (kind != Kind::gaussian && !(photons > 0)) {
      throw ImageError("noise model: photon count must be positive, got " + std::to_string(photons));
    }
    if (!(sigma >= 0)) throw ImageError("noise model: sigma must be >= 0");
  }

  /// Scalar fed to the network as its noise-level channel.
  double level() const {
    switch (kind) {
      case Kind::gaussian:
        return sigma;
      case Kind::poisson:
        return 1.0 / std::sqrt(photons);
      case Kind::poisson_gaussian:
        return std::sqrt(1.0 / photons + sigma * sigma);
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case Kind::gaussian:
        return "gaussian";
      case Kind::poisson:
        return "poisson";
      case Kind::poisson_gaussian:
        return "poisson-gaussian";
    }
    return "?";
  }
};

inline NoiseModel::Kind parse_noise_kind(const std::string& s) {
  if (s == "gaussian") return NoiseModel::Kind::gaussian;
  if (s == "poisson") return NoiseModel::Kind::poisson;
  if (s == "poisson-gaussian") return NoiseModel::Kind::poisson_gaussian;
  throw ImageError("unknown noise kind '" + s + "'");
}

namespace detail {

inline void apply_noise(std::vector<float>& values, const NoiseModel& model, std::uint64_t seed) {
  model.validate();
  std::mt19937_64 rng(seed);
  const bool shot = model.kind != NoiseModel::Kind::gaussian;
  const bool read = model.kind != NoiseModel::Kind::poisson && model.sigma > 0;
  std::normal_distribution<double> normal(0.0, model.sigma > 0 ? model.sigma : 1.0);
  for (float& v : values) {
    double y = v;
    if (shot) {
      const double mean = model.photons * std::max(0.0, y);
      double count = 0.0;
      if (mean > 0) count = static_cast<double>(std::poisson_distribution<std::int64_t>(mean)(rng));
      y = count / model.photons;
    }
    if (read) y += normal(rng);
    v = static_cast<float>(std::max(0.0, y));
  }
}

}  // namespace detail

/// Sensor noise. Negatives clamp to 0; values above 1 are kept.
inline BayerMosaic add_noise(const BayerMosaic& clean, const NoiseModel& model, std::uint64_t seed) {
  BayerMosaic out = clean;
  detail::apply_noise(out.data, model, seed);
  return out;
}

inline RgbImage add_noise(const RgbImage& clean, const NoiseModel& model, std::uint64_t seed) {
  RgbImage out = clean;
  detail::apply_noise(out.data, model, seed);
  return out;
}

/// 10 log10(max^2 / MSE). Returns +infinity when the images are identical;
/// reports substitute psnr_sentinel_db.
inline double psnr(const RgbImage& output, const RgbImage& reference, double max_value = 1.0) {
  if (output.height != reference.height || output.width != reference.width) {
    throw ImageError("psnr: shape mismatch " + std::to_string(output.height) + "x" +
                     std::to_string(output.width) + " vs " + std::to_string(reference.height) +
                     "x" + std::to_string(reference.width));
  }
  if (!(max_value > 0)) throw ImageError("psnr: max_value must be positive");
  double acc = 0;
  for (std::size_t i = 0; i < output.data.size(); ++i) {
    const double d = static_cast<double>(output.data[i]) - reference.data[i];
    acc += d * d;
  }
  if (acc == 0) return std::numeric_limits<double>::infinity();
  const double mse = acc / static_cast<double>(output.data.size());
  return 10.0 * std::log10(max_value * max_value / mse);
}

inline constexpr double psnr_sentinel_db = 100.0;

inline double report_psnr(double db) { return std::isfinite(db) ? db : psnr_sentinel_db; }

inline RgbImage clamp01(RgbImage image) {
  for (float& v : image.data) v = std::min(1.0f, std::max(0.0f, v));
  return image;
}

/// Bilinear demosaic, used only for previews.
inline RgbImage demosaic_bilinear(const BayerMosaic& mosaic) {
  const RgbImage masked = mask_mosaic(mosaic);
  RgbImage out(mosaic.height, mosaic.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < mosaic.height; ++y)
      for (int x = 0; x < mosaic.width; ++x) {
        if (rggb_channel(y, x) == c) {
          out.at(c, y, x) = mosaic.at(y, x);
          continue;
        }
        double sum = 0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy;
            const int xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= mosaic.height || xx >= mosaic.width) continue;
            if (rggb_channel(yy, xx) != c) continue;
            sum += masked.at(c, yy, xx);
            ++n;
          }
        out.at(c, y, x) = n > 0 ? static_cast<float>(sum / n) : 0.0f;
      }
  return out;
}

}  // namespace stereoisp
