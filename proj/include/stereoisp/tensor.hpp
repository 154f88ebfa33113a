#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

namespace stereoisp {

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// N x C x H x W extents.
struct Shape {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  constexpr std::int64_t numel() const { return n * c * h * w; }
  constexpr std::int64_t plane() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

// Worker count used inside ops. 1 is the strict sequential mode.
inline int& thread_count() {
  static int count = 1;
  return count;
}

inline void set_thread_count(int n) { thread_count() = std::max(1, n); }

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Runs fn(i) for i in [0, n), split into contiguous chunks across workers.
/// Callers must only write to disjoint outputs per index.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
  const int workers = static_cast<int>(std::min<std::int64_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const std::int64_t begin = t * chunk;
    const std::int64_t end = std::min(n, begin + chunk);
    pool.emplace_back([begin, end, &fn] {
      for (std::int64_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;
  bool requires_grad = false;
  bool released = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !released && !backward_fn && parents.empty(); }

  // Grad buffer of this node, allocated as zeros on first use.
  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(values.size(), T(0));
    return grad;
  }
};

template <typename T>
void check_finite(std::span<const T> values, const char* what) {
  bool bad = false;
  for (const T v : values) bad |= !(std::abs(v) <= std::numeric_limits<T>::max());
  if (bad) throw TensorError(std::string("non-finite value produced by ") + what);
}

}  // namespace detail

/// Dense NCHW array that can take part in reverse-mode differentiation.
/// Handles are shallow: copies share storage and graph state.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = detail::Node<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return from(shape, std::vector<T>(static_cast<std::size_t>(shape.numel()), T(0)),
                requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    return from(shape, std::vector<T>(static_cast<std::size_t>(shape.numel()), value),
                requires_grad);
  }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
      throw TensorError("negative extent in shape " + shape.str());
    }
    if (static_cast<std::int64_t>(values.size()) != shape.numel()) {
      throw TensorError("value count " + std::to_string(values.size()) +
                        " does not match shape " + shape.str());
    }
    auto node = std::make_shared<Node>();
    node->shape = shape;
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  std::int64_t numel() const { return node().shape.numel(); }

  std::span<const T> values() const { return node().values; }
  /// Write access for leaves only (parameters, optimizer updates).
  std::span<T> mutable_values() {
    if (!node().is_leaf()) throw TensorError("cannot mutate the values of a recorded result");
    return node_->values;
  }

  T item() const {
    if (numel() != 1) throw TensorError("item() on tensor of shape " + shape().str());
    return node().values[0];
  }

  bool requires_grad() const { return node().requires_grad; }
  bool has_grad() const { return !node().grad.empty(); }
  std::span<const T> grad() const { return node().grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() {
    if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  /// Independent leaf copy of the values (no grad, no history).
  Tensor detach_copy(bool requires_grad = false) const {
    return from(shape(), node().values, requires_grad);
  }

  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  /// Builds an op result. History is recorded only if some input requires grad.
  static Tensor make_result(Shape shape, std::vector<T> values,
                            std::vector<std::shared_ptr<Node>> parents,
                            std::function<void(Node&)> backward_fn, const char* op_name) {
    detail::check_finite<T>(values, op_name);
    auto node = std::make_shared<Node>();
    node->shape = shape;
    node->values = std::move(values);
    const bool needs = grad_mode_flag() && std::any_of(parents.begin(), parents.end(),
                                   [](const auto& p) { return p && p->requires_grad; });
    if (needs) {
      node->requires_grad = true;
      node->parents = std::move(parents);
      node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
  }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Node& node() const {
    if (!node_) throw TensorError("use of an undefined tensor");
    return *node_;
  }

  std::shared_ptr<Node> node_;
};

/// Reverse pass from a scalar loss. Gradients accumulate into every reachable
/// leaf that requires grad; the recorded graph is released afterwards.
template <typename T>
void backward(const Tensor<T>& loss) {
  using Node = detail::Node<T>;
  if (!loss.defined() || loss.numel() != 1) {
    throw TensorError("backward requires a scalar loss, got shape " +
                      (loss.defined() ? loss.shape().str() : std::string("<undefined>")));
  }
  const auto& root = loss.node_ptr();
  if (root->released) throw TensorError("backward on a graph that was already released");
  if (!root->requires_grad || root->is_leaf()) {
    throw TensorError("loss is not the result of a recorded computation");
  }

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->released) throw TensorError("backward through a released graph");
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
  for (Node* node : order) {
    if (node->is_leaf()) {
      detail::check_finite<T>(node->grad, "backward");
      continue;
    }
    node->backward_fn = nullptr;
    node->parents.clear();
    node->grad.clear();
    node->grad.shrink_to_fit();
    node->released = true;
  }
}

}  // namespace stereoisp
