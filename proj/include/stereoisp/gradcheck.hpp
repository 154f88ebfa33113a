#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stereoisp/model.hpp"
#include "stereoisp/ops.hpp"
#include "stereoisp/tensor.hpp"

namespace stereoisp {

struct GradCheckResult {
  std::string name;
  double rel_error = 0;
  double tolerance = 0;
  std::int64_t checked = 0;  // number of scalar entries differenced
  bool passed() const { return rel_error < tolerance; }
};

/// Central-difference check of d loss / d x for every entry of every tensor in
/// `inputs`. The error is ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// over all entries together.
inline GradCheckResult check_gradients(const std::string& name, std::vector<Tensor<double>> inputs,
                                       const std::function<Tensor<double>()>& loss_fn, double tolerance,
                                       double h = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  double diff2 = 0;
  double a2 = 0;
  double n2 = 0;
  GradCheckResult r{name, 0, tolerance, 0};
  {
    NoGradGuard no_grad;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      auto values = inputs[k].mutable_values();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double plus = loss_fn().item();
        values[i] = saved - h;
        const double minus = loss_fn().item();
        values[i] = saved;
        const double numeric = (plus - minus) / (2 * h);
        const double a = analytic[k][i];
        diff2 += (a - numeric) * (a - numeric);
        a2 += a * a;
        n2 += numeric * numeric;
        ++r.checked;
      }
    }
  }
  const double scale = std::sqrt(std::max(a2, n2));
  r.rel_error = scale > 0 ? std::sqrt(diff2) / scale : std::sqrt(diff2);
  return r;
}

namespace detail {

inline Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, bool requires_grad = true,
                                    double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(s.numel()));
  for (auto& x : v) x = u(rng);
  return Tensor<double>::from(s, std::move(v), requires_grad);
}

// Values bounded away from zero so the ReLU kink is never straddled.
inline Tensor<double> kink_free_tensor(Shape s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(static_cast<std::size_t>(s.numel()));
  for (auto& x : v) x = sign(rng) ? u(rng) : -u(rng);
  return Tensor<double>::from(s, std::move(v), true);
}

inline std::vector<double> random_weights(std::int64_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (auto& x : w) x = u(rng);
  return w;
}

}  // namespace detail

/// Finite-difference checks for every differentiable op plus an end-to-end
/// two-port micro model (8 x 16 mosaics, depth 1, width 4), all in double.
inline std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed = 1, double layer_tol = 1e-5,
                                                        double model_tol = 1e-4) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> out;
  using detail::random_tensor;
  using detail::random_weights;

  // Each op is reduced to a scalar through a fixed random projection.
  auto project = [&](Shape s) {
    auto w = std::make_shared<std::vector<double>>(random_weights(s.numel(), rng));
    return [w](const Tensor<double>& t) { return weighted_sum(t, std::span<const double>(*w)); };
  };

  {
    auto x = random_tensor({2, 3, 6, 7}, rng);
    auto w = random_tensor({4, 3, 3, 3}, rng);
    auto b = random_tensor({1, 4, 1, 1}, rng);
    auto p = project({2, 4, 6, 7});
    out.push_back(check_gradients("conv2d 3x3 pad 1", {x, w, b}, [=] { return p(conv2d(x, w, b, 1, 1)); },
                                  layer_tol));
  }
  {
    auto x = random_tensor({2, 3, 7, 8}, rng);
    auto w = random_tensor({2, 3, 3, 3}, rng);
    auto b = random_tensor({1, 2, 1, 1}, rng);
    auto p = project({2, 2, 3, 3});
    out.push_back(check_gradients("conv2d 3x3 stride 2 no pad", {x, w, b},
                                  [=] { return p(conv2d(x, w, b, 2, 0)); }, layer_tol));
  }
  {
    auto x = random_tensor({2, 5, 4, 6}, rng);
    auto w = random_tensor({3, 5, 1, 1}, rng);
    auto b = random_tensor({1, 3, 1, 1}, rng);
    auto p = project({2, 3, 4, 6});
    out.push_back(check_gradients("conv2d 1x1", {x, w, b}, [=] { return p(conv2d(x, w, b, 1, 0)); }, layer_tol));
  }
  {
    auto x = random_tensor({3, 4, 5, 6}, rng);
    auto g = random_tensor({1, 4, 1, 1}, rng, true, 0.5, 1.5);
    auto b = random_tensor({1, 4, 1, 1}, rng);
    auto p = project({3, 4, 5, 6});
    auto stats = std::make_shared<RunningStats<double>>(RunningStats<double>::create(4));
    out.push_back(check_gradients("batchnorm2d train", {x, g, b},
                                  [=] { return p(batchnorm2d(x, g, b, *stats, NormMode::train)); }, layer_tol));
    out.push_back(check_gradients("batchnorm2d eval", {x, g, b},
                                  [=] { return p(batchnorm2d(x, g, b, *stats, NormMode::eval)); }, layer_tol));
  }
  {
    auto x = detail::kink_free_tensor({2, 3, 4, 5}, rng);
    auto p = project({2, 3, 4, 5});
    out.push_back(check_gradients("relu", {x}, [=] { return p(relu(x)); }, layer_tol));
  }
  {
    auto x = random_tensor({2, 3, 4, 6}, rng);
    auto p = project({2, 12, 2, 3});
    out.push_back(check_gradients("pixel_unshuffle", {x}, [=] { return p(pixel_unshuffle(x, 2)); }, layer_tol));
  }
  {
    auto x = random_tensor({2, 8, 3, 2}, rng);
    auto p = project({2, 2, 6, 4});
    out.push_back(check_gradients("pixel_shuffle", {x}, [=] { return p(pixel_shuffle(x, 2)); }, layer_tol));
  }
  {
    auto a = random_tensor({2, 2, 3, 4}, rng);
    auto b = random_tensor({2, 3, 3, 4}, rng);
    auto p = project({2, 5, 3, 4});
    out.push_back(check_gradients("concat_channels", {a, b}, [=] { return p(concat_channels<double>({a, b})); },
                                  layer_tol));
  }
  {
    auto x = random_tensor({2, 6, 3, 4}, rng);
    auto p = project({2, 3, 3, 4});
    out.push_back(check_gradients("slice_channels", {x}, [=] { return p(slice_channels(x, 2, 3)); }, layer_tol));
  }
  {
    auto x = random_tensor({2, 1, 4, 6}, rng);
    auto p = project({2, 3, 4, 6});
    out.push_back(check_gradients("bayer_mask", {x}, [=] { return p(bayer_mask(x)); }, layer_tol));
  }
  {
    auto a = random_tensor({2, 3, 4, 5}, rng);
    auto b = random_tensor({2, 3, 4, 5}, rng);
    out.push_back(check_gradients("mse_loss", {a, b}, [=] { return mse_loss(a, b); }, layer_tol));
  }
  {
    auto x = random_tensor({2, 3, 4, 5}, rng);
    out.push_back(check_gradients("sum_squares", {x}, [=] { return sum_squares(x); }, layer_tol));
  }
  {
    ModelConfig cfg;
    cfg.depth = 1;
    cfg.width = 4;
    auto params = std::make_shared<ModelParams<double>>(build_model<double>(cfg, seed));
    auto m = random_tensor({2, 1, 8, 16}, rng, false, 0.0, 1.0);
    auto s = random_tensor({2, 1, 8, 16}, rng, false, 0.0, 1.0);
    auto target = random_tensor({2, 3, 8, 16}, rng, false, 0.0, 1.0);
    const std::vector<double> levels{0.3, 0.3};
    out.push_back(check_gradients(
        "end-to-end two-port model", params->trainable(),
        [=] { return mse_loss(forward(*params, m, s, std::span<const double>(levels), NormMode::train), target); },
        model_tol));
  }
  return out;
}

}  // namespace stereoisp
