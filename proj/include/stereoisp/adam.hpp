#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stereoisp/tensor.hpp"

namespace stereoisp {

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState create(const std::vector<Tensor<T>>& params, double beta1 = 0.9,
                          double beta2 = 0.999, double eps = 1e-8) {
    AdamState s;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    for (const auto& p : params) {
      s.m.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
      s.v.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
    }
    return s;
  }
};

/// One bias-corrected Adam update over `params` using their accumulated grads.
/// Per-element arithmetic runs in double; moments are stored as T.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr) {
  if (!(lr > 0)) throw TensorError("adam_step: learning rate must be positive");
  if (params.size() != state.m.size() || params.size() != state.v.size()) {
    throw TensorError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                      " tensors but " + std::to_string(params.size()) + " were given");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].has_grad()) {
      throw TensorError("adam_step: parameter " + std::to_string(k) + " has no gradient");
    }
    if (static_cast<std::int64_t>(state.m[k].size()) != params[k].numel()) {
      throw TensorError("adam_step: moment shape mismatch for parameter " + std::to_string(k));
    }
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].mutable_values();
    const auto g = params[k].grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      theta[i] = static_cast<T>(theta[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + state.eps));
    }
  }
}

}  // namespace stereoisp
