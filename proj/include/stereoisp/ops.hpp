#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "stereoisp/tensor.hpp"

namespace stereoisp {

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  std::int64_t channels, height, width, kernel, stride, padding, out_height, out_width;
  std::int64_t rows() const { return channels * kernel * kernel; }
  std::int64_t cols() const { return out_height * out_width; }
  bool is_pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

// Valid output columns [lo, hi) for kernel column kx when stride is 1.
inline std::pair<std::int64_t, std::int64_t> valid_columns(const ConvGeometry& g, std::int64_t kx) {
  const std::int64_t lo = std::clamp<std::int64_t>(g.padding - kx, 0, g.out_width);
  const std::int64_t hi = std::clamp<std::int64_t>(g.width + g.padding - kx, lo, g.out_width);
  return {lo, hi};
}

// Column matrix (C*K*K) x (OH*OW) for one sample.
template <typename T>
void im2col(const T* in, const ConvGeometry& g, T* col) {
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        T* row = col + ((c * g.kernel + ky) * g.kernel + kx) * g.cols();
        const auto [lo, hi] = valid_columns(g, kx);
        for (std::int64_t oy = 0; oy < g.out_height; ++oy) {
          const std::int64_t iy = oy * g.stride + ky - g.padding;
          T* dst = row + oy * g.out_width;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_width, T(0));
            continue;
          }
          const T* src = in + (c * g.height + iy) * g.width;
          if (g.stride == 1) {
            std::fill(dst, dst + lo, T(0));
            std::copy(src + lo + kx - g.padding, src + hi + kx - g.padding, dst + lo);
            std::fill(dst + hi, dst + g.out_width, T(0));
            continue;
          }
          for (std::int64_t ox = 0; ox < g.out_width; ++ox) {
            const std::int64_t ix = ox * g.stride + kx - g.padding;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* in) {
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
      for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
        const T* row = col + ((c * g.kernel + ky) * g.kernel + kx) * g.cols();
        const auto [lo, hi] = valid_columns(g, kx);
        for (std::int64_t oy = 0; oy < g.out_height; ++oy) {
          const std::int64_t iy = oy * g.stride + ky - g.padding;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + oy * g.out_width;
          T* dst = in + (c * g.height + iy) * g.width;
          if (g.stride == 1) {
            T* d = dst + kx - g.padding;
            for (std::int64_t ox = lo; ox < hi; ++ox) d[ox] += src[ox];
            continue;
          }
          for (std::int64_t ox = 0; ox < g.out_width; ++ox) {
            const std::int64_t ix = ox * g.stride + kx - g.padding;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void add_into(std::span<T> dst, std::span<const T> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

/// 2-D cross-correlation (no kernel flip). weight is Cout x Cin x K x K, bias
/// holds Cout values.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride = 1, int padding = 0) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (stride < 1) throw TensorError("conv2d: stride must be >= 1, got " + std::to_string(stride));
  if (padding < 0) throw TensorError("conv2d: padding must be >= 0, got " + std::to_string(padding));
  if (ws.h != ws.w) throw TensorError("conv2d: kernel must be square, got " + ws.str());
  if (is.c != ws.c) {
    throw TensorError("conv2d: input has " + std::to_string(is.c) + " channels but weight " +
                      ws.str() + " expects C_in=" + std::to_string(ws.c));
  }
  if (bias.numel() != ws.n) {
    throw TensorError("conv2d: bias has " + std::to_string(bias.numel()) +
                      " values but weight has C_out=" + std::to_string(ws.n));
  }
  const std::int64_t span_h = is.h + 2 * padding - ws.h;
  const std::int64_t span_w = is.w + 2 * padding - ws.w;
  if (span_h < 0 || span_w < 0) {
    throw TensorError("conv2d: kernel " + std::to_string(ws.h) + " larger than padded input " +
                      is.str());
  }

  const detail::ConvGeometry g{is.c, is.h, is.w, ws.h, stride, padding,
                               span_h / stride + 1, span_w / stride + 1};
  const std::int64_t cout = ws.n;
  const Shape os{is.n, cout, g.out_height, g.out_width};
  std::vector<T> out(static_cast<std::size_t>(os.numel()));

  const bool record = grad_mode_flag() && (input.requires_grad() || weight.requires_grad() || bias.requires_grad());
  const bool keep_cols = record && weight.requires_grad() && !g.is_pointwise();
  auto cols = std::make_shared<std::vector<T>>();
  if (keep_cols) cols->resize(static_cast<std::size_t>(is.n * g.rows() * g.cols()));

  const T* in_ptr = input.values().data();
  const T* w_ptr = weight.values().data();
  const T* b_ptr = bias.values().data();
  const std::int64_t in_stride = is.c * is.plane();
  const std::int64_t out_stride = cout * g.cols();

  parallel_for(is.n, [&](std::int64_t n) {
    detail::ConstMatrixMap<T> wm(w_ptr, cout, g.rows());
    detail::MatrixMap<T> om(out.data() + n * out_stride, cout, g.cols());
    if (g.is_pointwise()) {
      om.noalias() = wm * detail::ConstMatrixMap<T>(in_ptr + n * in_stride, g.rows(), g.cols());
    } else {
      std::vector<T> scratch;
      T* col;
      if (keep_cols) {
        col = cols->data() + n * g.rows() * g.cols();
      } else {
        scratch.resize(static_cast<std::size_t>(g.rows() * g.cols()));
        col = scratch.data();
      }
      detail::im2col(in_ptr + n * in_stride, g, col);
      om.noalias() = wm * detail::ConstMatrixMap<T>(col, g.rows(), g.cols());
    }
    for (std::int64_t co = 0; co < cout; ++co) om.row(co).array() += b_ptr[co];
  });

  auto in_node = input.node_ptr();
  auto w_node = weight.node_ptr();
  auto b_node = bias.node_ptr();
  return Tensor<T>::make_result(
      os, std::move(out), {in_node, w_node, b_node},
      [in_node, w_node, b_node, g, cout, cols, keep_cols, batch = is.n](detail::Node<T>& self) {
        const std::int64_t in_stride = g.channels * g.height * g.width;
        const std::int64_t out_stride = cout * g.cols();
        const T* gout = self.grad.data();
        if (b_node->requires_grad) {
          auto gb = b_node->grad_buffer();
          for (std::int64_t n = 0; n < batch; ++n) {
            for (std::int64_t co = 0; co < cout; ++co) {
              const T* row = gout + n * out_stride + co * g.cols();
              T acc = 0;
              for (std::int64_t p = 0; p < g.cols(); ++p) acc += row[p];
              gb[co] += acc;
            }
          }
        }
        if (w_node->requires_grad) {
          detail::MatrixMap<T> gw(w_node->grad_buffer().data(), cout, g.rows());
          std::vector<T> scratch;
          if (!keep_cols && !g.is_pointwise()) scratch.resize(g.rows() * g.cols());
          for (std::int64_t n = 0; n < batch; ++n) {
            const T* col;
            if (g.is_pointwise()) {
              col = in_node->values.data() + n * in_stride;
            } else if (keep_cols) {
              col = cols->data() + n * g.rows() * g.cols();
            } else {
              detail::im2col(in_node->values.data() + n * in_stride, g, scratch.data());
              col = scratch.data();
            }
            gw.noalias() += detail::ConstMatrixMap<T>(gout + n * out_stride, cout, g.cols()) *
                            detail::ConstMatrixMap<T>(col, g.rows(), g.cols()).transpose();
          }
        }
        if (in_node->requires_grad) {
          T* gin = in_node->grad_buffer().data();
          const T* w_ptr = w_node->values.data();
          parallel_for(batch, [&](std::int64_t n) {
            detail::ConstMatrixMap<T> wm(w_ptr, cout, g.rows());
            detail::ConstMatrixMap<T> go(gout + n * out_stride, cout, g.cols());
            if (g.is_pointwise()) {
              detail::MatrixMap<T> gi(gin + n * in_stride, g.rows(), g.cols());
              gi.noalias() += wm.transpose() * go;
            } else {
              std::vector<T> gcol(static_cast<std::size_t>(g.rows() * g.cols()));
              detail::MatrixMap<T> gc(gcol.data(), g.rows(), g.cols());
              gc.noalias() = wm.transpose() * go;
              detail::col2im_add(gcol.data(), g, gin + n * in_stride);
            }
          });
        }
      },
      "conv2d");
}

enum class NormMode { train, eval };

/// Running statistics of a batch-norm layer. `count` holds the number of
/// training batches folded in (a 1-element tensor so it persists with the
/// other parameters).
template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;
  Tensor<T> count;

  static RunningStats create(std::int64_t channels) {
    return {Tensor<T>::zeros({1, channels, 1, 1}), Tensor<T>::full({1, channels, 1, 1}, T(1)),
            Tensor<T>::zeros({1, 1, 1, 1})};
  }
};

/// Per-channel batch normalization. The first training batch initializes the
/// running statistics directly; later batches blend with `momentum`.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      RunningStats<T>& stats, NormMode mode, double momentum = 0.1,
                      double eps = 1e-5) {
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  using ArrayMap = Eigen::Map<Array>;
  using ConstArrayMap = Eigen::Map<const Array>;
  const Shape& s = input.shape();
  if (gamma.numel() != s.c || beta.numel() != s.c) {
    throw TensorError("batchnorm2d: gamma/beta have " + std::to_string(gamma.numel()) + "/" +
                      std::to_string(beta.numel()) + " values but input " + s.str() + " has " +
                      std::to_string(s.c) + " channels");
  }
  if (stats.mean.numel() != s.c || stats.var.numel() != s.c) {
    throw TensorError("batchnorm2d: running stats do not match channel count " +
                      std::to_string(s.c));
  }
  if (!(eps > 0)) throw TensorError("batchnorm2d: eps must be positive");
  if (mode == NormMode::eval && stats.count.values()[0] == T(0)) {
    throw TensorError("batchnorm2d: eval mode requested before any running statistics were recorded");
  }

  const std::int64_t channels = s.c;
  const std::int64_t plane = s.plane();
  const std::int64_t count = s.n * plane;
  if (mode == NormMode::train && count < 1) throw TensorError("batchnorm2d: empty batch");
  const T* x = input.values().data();
  const T* gm = gamma.values().data();
  const T* bt = beta.values().data();

  std::vector<T> out(static_cast<std::size_t>(s.numel()));
  auto xhat = std::make_shared<std::vector<T>>(out.size());
  auto inv_std = std::make_shared<std::vector<T>>(channels);
  const bool train = mode == NormMode::train;

  for (std::int64_t c = 0; c < channels; ++c) {
    double mean;
    double var;
    if (train) {
      double sum = 0;
      for (std::int64_t n = 0; n < s.n; ++n)
        sum += ConstArrayMap(x + (n * channels + c) * plane, plane).template cast<double>().sum();
      mean = sum / static_cast<double>(count);
      double sq = 0;
      for (std::int64_t n = 0; n < s.n; ++n)
        sq += (ConstArrayMap(x + (n * channels + c) * plane, plane).template cast<double>() - mean)
                  .square()
                  .sum();
      var = sq / static_cast<double>(count);
      auto rm = stats.mean.mutable_values();
      auto rv = stats.var.mutable_values();
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      if (stats.count.values()[0] == T(0)) {
        rm[c] = static_cast<T>(mean);
        rv[c] = static_cast<T>(unbiased);
      } else {
        rm[c] = static_cast<T>((1 - momentum) * rm[c] + momentum * mean);
        rv[c] = static_cast<T>((1 - momentum) * rv[c] + momentum * unbiased);
      }
    } else {
      mean = stats.mean.values()[c];
      var = stats.var.values()[c];
    }
    const T istd = static_cast<T>(1.0 / std::sqrt(var + eps));
    const T mu = static_cast<T>(mean);
    (*inv_std)[c] = istd;
    for (std::int64_t n = 0; n < s.n; ++n) {
      const std::int64_t base = (n * channels + c) * plane;
      ArrayMap h(xhat->data() + base, plane);
      h = (ConstArrayMap(x + base, plane) - mu) * istd;
      ArrayMap(out.data() + base, plane) = h * gm[c] + bt[c];
    }
  }
  if (train) stats.count.mutable_values()[0] += T(1);

  auto in_node = input.node_ptr();
  auto g_node = gamma.node_ptr();
  auto b_node = beta.node_ptr();
  return Tensor<T>::make_result(
      s, std::move(out), {in_node, g_node, b_node},
      [in_node, g_node, b_node, xhat, inv_std, s, train](detail::Node<T>& self) {
        const std::int64_t plane = s.plane();
        const double m = static_cast<double>(s.n * plane);
        const T* gy = self.grad.data();
        const T* gm = g_node->values.data();
        for (std::int64_t c = 0; c < s.c; ++c) {
          double sum_gy = 0;
          double sum_gy_xhat = 0;
          for (std::int64_t n = 0; n < s.n; ++n) {
            const std::int64_t base = (n * s.c + c) * plane;
            ConstArrayMap g(gy + base, plane);
            sum_gy += g.template cast<double>().sum();
            sum_gy_xhat +=
                (g.template cast<double>() * ConstArrayMap(xhat->data() + base, plane).template cast<double>())
                    .sum();
          }
          if (g_node->requires_grad) g_node->grad_buffer()[c] += static_cast<T>(sum_gy_xhat);
          if (b_node->requires_grad) b_node->grad_buffer()[c] += static_cast<T>(sum_gy);
          if (!in_node->requires_grad) continue;
          T* gx = in_node->grad_buffer().data();
          const T scale = static_cast<T>(static_cast<double>(gm[c]) * (*inv_std)[c]);
          const T mean_term = train ? static_cast<T>(sum_gy / m) : T(0);
          const T proj = train ? static_cast<T>(sum_gy_xhat / m) : T(0);
          for (std::int64_t n = 0; n < s.n; ++n) {
            const std::int64_t base = (n * s.c + c) * plane;
            ArrayMap(gx + base, plane) +=
                scale * (ConstArrayMap(gy + base, plane) - mean_term -
                         ConstArrayMap(xhat->data() + base, plane) * proj);
          }
        }
      },
      "batchnorm2d");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  const auto x = input.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  auto in_node = input.node_ptr();
  return Tensor<T>::make_result(
      input.shape(), std::move(out), {in_node},
      [in_node](detail::Node<T>& self) {
        T* gx = in_node->grad_buffer().data();
        const T* x = in_node->values.data();
        const T* gy = self.grad.data();
        const std::size_t n = self.grad.size();
        for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > T(0) ? gy[i] : T(0);
      },
      "relu");
}

namespace detail {

// Index map of pixel_unshuffle: entry j of the output holds input[src[j]].
inline std::vector<std::int64_t> unshuffle_index(const Shape& in, std::int64_t f) {
  const Shape out{in.n, in.c * f * f, in.h / f, in.w / f};
  std::vector<std::int64_t> src(static_cast<std::size_t>(out.numel()));
  std::size_t j = 0;
  for (std::int64_t n = 0; n < out.n; ++n)
    for (std::int64_t oc = 0; oc < out.c; ++oc) {
      const std::int64_t c = oc / (f * f);
      const std::int64_t dy = (oc / f) % f;
      const std::int64_t dx = oc % f;
      for (std::int64_t y = 0; y < out.h; ++y)
        for (std::int64_t x = 0; x < out.w; ++x)
          src[j++] = ((n * in.c + c) * in.h + y * f + dy) * in.w + x * f + dx;
    }
  return src;
}

// out[j] = in[src[j]] with the matching scatter-add backward.
template <typename T>
Tensor<T> gather(const Tensor<T>& input, Shape out_shape, std::vector<std::int64_t> src,
                 const char* name) {
  const auto x = input.values();
  std::vector<T> out(src.size());
  for (std::size_t j = 0; j < src.size(); ++j) out[j] = x[src[j]];
  auto in_node = input.node_ptr();
  auto index = std::make_shared<std::vector<std::int64_t>>(std::move(src));
  return Tensor<T>::make_result(
      out_shape, std::move(out), {in_node},
      [in_node, index](Node<T>& self) {
        auto gx = in_node->grad_buffer();
        for (std::size_t j = 0; j < index->size(); ++j) gx[(*index)[j]] += self.grad[j];
      },
      name);
}

}  // namespace detail

/// C x H x W -> (C*f*f) x (H/f) x (W/f); output channel c*f*f + dy*f + dx
/// holds sub-pixel (dy, dx).
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, int factor = 2) {
  const Shape& s = input.shape();
  if (factor < 1 || s.h % factor != 0 || s.w % factor != 0) {
    throw TensorError("pixel_unshuffle: spatial dims of " + s.str() + " not divisible by " +
                      std::to_string(factor));
  }
  const Shape out{s.n, s.c * factor * factor, s.h / factor, s.w / factor};
  return detail::gather(input, out, detail::unshuffle_index(s, factor), "pixel_unshuffle");
}

/// Exact inverse of pixel_unshuffle.
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, int factor = 2) {
  const Shape& s = input.shape();
  const std::int64_t ff = static_cast<std::int64_t>(factor) * factor;
  if (factor < 1 || s.c % ff != 0) {
    throw TensorError("pixel_shuffle: channel count of " + s.str() + " not divisible by " +
                      std::to_string(ff));
  }
  const Shape out{s.n, s.c / ff, s.h * factor, s.w * factor};
  const auto forward = detail::unshuffle_index(out, factor);
  std::vector<std::int64_t> src(forward.size());
  for (std::size_t j = 0; j < forward.size(); ++j) src[forward[j]] = static_cast<std::int64_t>(j);
  return detail::gather(input, out, std::move(src), "pixel_shuffle");
}

/// Channel-wise concatenation; all parts share N, H, W.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw TensorError("concat_channels: no inputs");
  const Shape& first = parts.front().shape();
  std::int64_t channels = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw TensorError("concat_channels: shape " + s.str() + " incompatible with " + first.str());
    }
    channels += s.c;
  }
  const Shape out_shape{first.n, channels, first.h, first.w};
  const std::int64_t plane = first.plane();
  std::vector<T> out(static_cast<std::size_t>(out_shape.numel()));
  std::vector<std::shared_ptr<detail::Node<T>>> nodes;
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    const auto v = p.values();
    for (std::int64_t n = 0; n < s.n; ++n) {
      std::copy_n(v.data() + n * s.c * plane, s.c * plane,
                  out.data() + (n * channels + offset) * plane);
    }
    nodes.push_back(p.node_ptr());
    offsets.push_back(offset);
    offset += s.c;
  }
  return Tensor<T>::make_result(
      out_shape, std::move(out), nodes,
      [nodes, offsets, out_shape](detail::Node<T>& self) {
        const std::int64_t plane = out_shape.plane();
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          auto& node = nodes[k];
          if (!node->requires_grad) continue;
          auto g = node->grad_buffer();
          const std::int64_t c = node->shape.c;
          for (std::int64_t n = 0; n < out_shape.n; ++n) {
            const T* src = self.grad.data() + (n * out_shape.c + offsets[k]) * plane;
            T* dst = g.data() + n * c * plane;
            for (std::int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
          }
        }
      },
      "concat_channels");
}

/// Channels [begin, begin + count).
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::int64_t begin, std::int64_t count) {
  const Shape& s = input.shape();
  if (begin < 0 || count < 0 || begin + count > s.c) {
    throw TensorError("slice_channels: range [" + std::to_string(begin) + ", " +
                      std::to_string(begin + count) + ") outside " + s.str());
  }
  std::vector<std::int64_t> src;
  src.reserve(static_cast<std::size_t>(s.n * count * s.plane()));
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = begin; c < begin + count; ++c)
      for (std::int64_t i = 0; i < s.plane(); ++i) src.push_back((n * s.c + c) * s.plane() + i);
  return detail::gather(input, Shape{s.n, count, s.h, s.w}, std::move(src), "slice_channels");
}

/// N x 1 x H x W RGGB mosaic -> N x 3 x H x W with each sample moved into
/// its color channel and zeros elsewhere.
template <typename T>
Tensor<T> bayer_mask(const Tensor<T>& mosaic) {
  const Shape& s = mosaic.shape();
  if (s.c != 1 || s.h % 2 != 0 || s.w % 2 != 0) {
    throw TensorError("bayer_mask: expected N x 1 x even x even mosaic, got " + s.str());
  }
  const Shape out_shape{s.n, 3, s.h, s.w};
  const auto x = mosaic.values();
  std::vector<T> out(static_cast<std::size_t>(out_shape.numel()), T(0));
  auto channel_of = [](std::int64_t y, std::int64_t xx) -> std::int64_t {
    const bool ey = y % 2 == 0;
    const bool ex = xx % 2 == 0;
    if (ey && ex) return 0;
    if (!ey && !ex) return 2;
    return 1;
  };
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t y = 0; y < s.h; ++y)
      for (std::int64_t xx = 0; xx < s.w; ++xx) {
        const std::int64_t c = channel_of(y, xx);
        out[((n * 3 + c) * s.h + y) * s.w + xx] = x[(n * s.h + y) * s.w + xx];
      }
  auto in_node = mosaic.node_ptr();
  return Tensor<T>::make_result(
      out_shape, std::move(out), {in_node},
      [in_node, s, channel_of](detail::Node<T>& self) {
        auto g = in_node->grad_buffer();
        for (std::int64_t n = 0; n < s.n; ++n)
          for (std::int64_t y = 0; y < s.h; ++y)
            for (std::int64_t xx = 0; xx < s.w; ++xx) {
              const std::int64_t c = channel_of(y, xx);
              g[(n * s.h + y) * s.w + xx] += self.grad[((n * 3 + c) * s.h + y) * s.w + xx];
            }
      },
      "bayer_mask");
}

/// Mean of squared differences over every element.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw TensorError("mse_loss: shape mismatch " + pred.shape().str() + " vs " +
                      target.shape().str());
  }
  const auto p = pred.values();
  const auto t = target.values();
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    acc += d * d;
  }
  const double count = static_cast<double>(p.size());
  auto p_node = pred.node_ptr();
  auto t_node = target.node_ptr();
  return Tensor<T>::make_result(
      {1, 1, 1, 1}, {static_cast<T>(acc / count)}, {p_node, t_node},
      [p_node, t_node, count](detail::Node<T>& self) {
        const double g = self.grad[0] * 2.0 / count;
        if (p_node->requires_grad) {
          auto gp = p_node->grad_buffer();
          for (std::size_t i = 0; i < gp.size(); ++i)
            gp[i] += static_cast<T>(g * (p_node->values[i] - t_node->values[i]));
        }
        if (t_node->requires_grad) {
          auto gt = t_node->grad_buffer();
          for (std::size_t i = 0; i < gt.size(); ++i)
            gt[i] -= static_cast<T>(g * (p_node->values[i] - t_node->values[i]));
        }
      },
      "mse_loss");
}

/// Sum of squares of every element.
template <typename T>
Tensor<T> sum_squares(const Tensor<T>& input) {
  const auto x = input.values();
  double acc = 0;
  for (const T v : x) acc += static_cast<double>(v) * v;
  auto in_node = input.node_ptr();
  return Tensor<T>::make_result(
      {1, 1, 1, 1}, {static_cast<T>(acc)}, {in_node},
      [in_node](detail::Node<T>& self) {
        auto g = in_node->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] += static_cast<T>(2) * self.grad[0] * in_node->values[i];
      },
      "sum_squares");
}

/// Sum of input * weights, with weights a constant of the same shape. Used to
/// reduce a tensor to a scalar probe for gradient checks.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& input, std::span<const T> weights) {
  if (static_cast<std::int64_t>(weights.size()) != input.numel()) {
    throw TensorError("weighted_sum: weight count does not match " + input.shape().str());
  }
  const auto x = input.values();
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x[i]) * weights[i];
  auto in_node = input.node_ptr();
  auto w = std::make_shared<std::vector<T>>(weights.begin(), weights.end());
  return Tensor<T>::make_result(
      {1, 1, 1, 1}, {static_cast<T>(acc)}, {in_node},
      [in_node, w](detail::Node<T>& self) {
        auto g = in_node->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * (*w)[i];
      },
      "weighted_sum");
}

}  // namespace stereoisp
