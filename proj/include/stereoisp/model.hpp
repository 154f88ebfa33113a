#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stereoisp/image.hpp"
#include "stereoisp/ops.hpp"
#include "stereoisp/raw_pipeline.hpp"
#include "stereoisp/tensor.hpp"

namespace stereoisp {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Architecture hyperparameters. `width` is the per-input channel count, so
/// a two-port model runs 2 * width channels per layer.
struct ModelConfig {
  int depth = 4;
  int width = 16;
  int kernel = 3;
  int ports = 2;
  bool noise_channel = true;

  int padding() const { return kernel / 2; }
  int layer_width() const { return ports * width; }
  int input_channels() const { return ports * 4 + (noise_channel ? 1 : 0); }
  int packed_channels() const { return ports * 12; }
  int fullres_input_channels() const { return ports * 6; }

  void validate() const {
    std::ostringstream why;
    if (depth < 1) why << "depth must be >= 1 (got " << depth << "); ";
    if (width < 4) why << "width must be >= 4 (got " << width << "); ";
    if (kernel < 3 || kernel % 2 == 0) why << "kernel must be odd and >= 3 (got " << kernel << "); ";
    if (ports != 1 && ports != 2) why << "ports must be 1 or 2 (got " << ports << "); ";
    if (!why.str().empty()) throw ModelError("invalid model config: " + why.str());
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  std::string str() const {
    std::ostringstream os;
    os << "depth=" << depth << " width=" << width << " kernel=" << kernel << " ports=" << ports
       << " noise_channel=" << (noise_channel ? "true" : "false");
    return os.str();
  }
};

template <typename T>
struct ConvLayer {
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
struct NormLayer {
  Tensor<T> gamma;
  Tensor<T> beta;
  RunningStats<T> stats;
};

/// conv -> batch norm -> ReLU
template <typename T>
struct ConvBlock {
  ConvLayer<T> conv;
  NormLayer<T> norm;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  std::vector<ConvBlock<T>> lowres;  // N blocks at half resolution
  ConvLayer<T> projection;           // 1x1, layer width -> 12 per port
  ConvBlock<T> fullres;
  ConvLayer<T> head;                 // 1x1 affine output, -> 3

  /// Every tensor in a fixed order with unique names.
  std::vector<NamedTensor<T>> named() const {
    std::vector<NamedTensor<T>> out;
    auto conv = [&](const std::string& prefix, const ConvLayer<T>& c) {
      out.push_back({prefix + ".weight", c.weight, true});
      out.push_back({prefix + ".bias", c.bias, true});
    };
    auto norm = [&](const std::string& prefix, const NormLayer<T>& n) {
      out.push_back({prefix + ".gamma", n.gamma, true});
      out.push_back({prefix + ".beta", n.beta, true});
      out.push_back({prefix + ".running_mean", n.stats.mean, false});
      out.push_back({prefix + ".running_var", n.stats.var, false});
      out.push_back({prefix + ".tracked", n.stats.count, false});
    };
    for (std::size_t i = 0; i < lowres.size(); ++i) {
      conv("lowres." + std::to_string(i) + ".conv", lowres[i].conv);
      norm("lowres." + std::to_string(i) + ".norm", lowres[i].norm);
    }
    conv("projection", projection);
    conv("fullres.conv", fullres.conv);
    norm("fullres.norm", fullres.norm);
    conv("head", head);
    return out;
  }

  std::vector<Tensor<T>> trainable() const {
    std::vector<Tensor<T>> out;
    for (auto& nt : named())
      if (nt.trainable) out.push_back(nt.tensor);
    return out;
  }

  void zero_grad() {
    for (auto& t : trainable()) t.zero_grad();
  }

  /// Deep copy; the result shares no storage with this instance.
  ModelParams clone() const {
    ModelParams out = *this;
    auto copy = [](Tensor<T>& t, bool grad) { t = t.detach_copy(grad); };
    auto conv = [&](ConvLayer<T>& c) {
      copy(c.weight, true);
      copy(c.bias, true);
    };
    auto norm = [&](NormLayer<T>& n) {
      copy(n.gamma, true);
      copy(n.beta, true);
      copy(n.stats.mean, false);
      copy(n.stats.var, false);
      copy(n.stats.count, false);
    };
    for (auto& b : out.lowres) {
      conv(b.conv);
      norm(b.norm);
    }
    conv(out.projection);
    conv(out.fullres.conv);
    norm(out.fullres.norm);
    conv(out.head);
    return out;
  }

  /// Copies every tensor's values from `other` (same config required).
  void assign_values(const ModelParams& other) {
    if (!(other.config == config)) throw ModelError("assign_values: config mismatch");
    auto dst = named();
    auto src = other.named();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      auto v = dst[i].tensor.mutable_values();
      std::copy(src[i].tensor.values().begin(), src[i].tensor.values().end(), v.begin());
    }
  }
};

namespace detail {

template <typename T>
ConvLayer<T> make_conv(int in, int out, int kernel, std::mt19937_64& rng) {
  const int fan_in = in * kernel * kernel;
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> w(static_cast<std::size_t>(out) * fan_in);
  for (auto& v : w) v = static_cast<T>(dist(rng));
  return {Tensor<T>::from({out, in, kernel, kernel}, std::move(w), true),
          Tensor<T>::zeros({1, out, 1, 1}, true)};
}

template <typename T>
NormLayer<T> make_norm(int channels) {
  return {Tensor<T>::full({1, channels, 1, 1}, T(1), true), Tensor<T>::zeros({1, channels, 1, 1}, true),
          RunningStats<T>::create(channels)};
}

template <typename T>
ConvBlock<T> make_block(int in, int out, int kernel, std::mt19937_64& rng) {
  return {make_conv<T>(in, out, kernel, rng), make_norm<T>(out)};
}

}  // namespace detail

/// Kaiming-uniform (fan-in) conv weights, zero biases, unit/zero norm affine.
template <typename T>
ModelParams<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelParams<T> p;
  p.config = config;
  const int lw = config.layer_width();
  int in = config.input_channels();
  for (int i = 0; i < config.depth; ++i) {
    p.lowres.push_back(detail::make_block<T>(in, lw, config.kernel, rng));
    in = lw;
  }
  p.projection = detail::make_conv<T>(lw, config.packed_channels(), 1, rng);
  p.fullres = detail::make_block<T>(config.fullres_input_channels(), lw, config.kernel, rng);
  p.head = detail::make_conv<T>(lw, 3, 1, rng);

  // Channel audit: packed input -> N x layer width -> 12/port -> 3/port
  // (+3 masked/port) -> layer width -> 3.
  if (p.lowres.front().conv.weight.shape().c != config.input_channels() ||
      p.projection.weight.shape().n != 12 * config.ports ||
      p.fullres.conv.weight.shape().c != 6 * config.ports || p.head.weight.shape().n != 3) {
    throw ModelError("channel audit failed for " + config.str());
  }
  return p;
}

/// Channel counts of the feature stack in forward order:
/// F0, F1..FN (block outputs), projection, shuffled per port (total),
/// full-res input, full-res block, output.
inline std::vector<int> channel_sequence(const ModelConfig& config) {
  std::vector<int> seq{config.input_channels()};
  for (int i = 0; i < config.depth; ++i) seq.push_back(config.layer_width());
  seq.push_back(config.packed_channels());
  seq.push_back(3 * config.ports);
  seq.push_back(config.fullres_input_channels());
  seq.push_back(config.layer_width());
  seq.push_back(3);
  return seq;
}

/// Trainable scalar count: conv weights/biases and norm gamma/beta.
template <typename T>
std::int64_t count_parameters(const ModelParams<T>& params) {
  std::int64_t total = 0;
  for (const auto& nt : params.named())
    if (nt.trainable) total += nt.tensor.numel();
  return total;
}

namespace detail {

template <typename T>
Tensor<T> run_block(ConvBlock<T>& b, const Tensor<T>& x, int padding, NormMode mode) {
  auto y = conv2d(x, b.conv.weight, b.conv.bias, 1, padding);
  y = batchnorm2d(y, b.norm.gamma, b.norm.beta, b.norm.stats, mode);
  return relu(y);
}

}  // namespace detail

/// Network forward pass. primary / secondary are N x 1 x H x W mosaics
/// (secondary ignored for one-port models); noise_levels holds one value per
/// sample. Returns N x 3 x H x W.
template <typename T>
Tensor<T> forward(ModelParams<T>& params, const Tensor<T>& primary, const Tensor<T>& secondary,
                  std::span<const T> noise_levels, NormMode mode) {
  const ModelConfig& cfg = params.config;
  const Shape& s = primary.shape();
  if (s.c != 1 || s.h % 2 != 0 || s.w % 2 != 0 || s.h < 2 || s.w < 2) {
    throw ModelError("forward: primary must be N x 1 x even x even, got " + s.str());
  }
  if (cfg.ports == 2 && secondary.shape() != s) {
    throw ModelError("forward: secondary " + secondary.shape().str() + " does not match primary " + s.str());
  }
  if (cfg.noise_channel && static_cast<std::int64_t>(noise_levels.size()) != s.n) {
    throw ModelError("forward: expected " + std::to_string(s.n) + " noise levels, got " +
                     std::to_string(noise_levels.size()));
  }
  const int pad = cfg.padding();

  std::vector<Tensor<T>> f0{pixel_unshuffle(primary, 2)};
  if (cfg.ports == 2) f0.push_back(pixel_unshuffle(secondary, 2));
  if (cfg.noise_channel) {
    const Shape ns{s.n, 1, s.h / 2, s.w / 2};
    std::vector<T> plane(static_cast<std::size_t>(ns.numel()));
    for (std::int64_t n = 0; n < s.n; ++n)
      std::fill_n(plane.begin() + n * ns.plane(), ns.plane(), noise_levels[n]);
    f0.push_back(Tensor<T>::from(ns, std::move(plane)));
  }
  auto x = concat_channels(f0);
  for (auto& block : params.lowres) x = detail::run_block(block, x, pad, mode);
  auto packed = conv2d(x, params.projection.weight, params.projection.bias, 1, 0);

  std::vector<Tensor<T>> stack;
  stack.push_back(bayer_mask(primary));
  stack.push_back(pixel_shuffle(slice_channels(packed, 0, 12), 2));
  if (cfg.ports == 2) {
    stack.push_back(bayer_mask(secondary));
    stack.push_back(pixel_shuffle(slice_channels(packed, 12, 12), 2));
  }
  auto full = detail::run_block(params.fullres, concat_channels(stack), pad, mode);
  return conv2d(full, params.head.weight, params.head.bias, 1, 0);
}

}  // namespace stereoisp
