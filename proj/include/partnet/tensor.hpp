#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "partnet/rng.hpp"

namespace partnet {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("shape dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  if (shape.empty()) return 1;  // scalar
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

// Reverse-mode autodiff node. Tensors are thin shared handles to TensorImpl;
// ops record parents and a backward function that scatters the node's grad
// into the parents' grads.
template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized lazily on backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl<T>>> parents;
  std::function<void(TensorImpl<T>&)> backward_fn;

  std::size_t numel() const { return value.size(); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : impl_(std::make_shared<TensorImpl<T>>()) {
    impl_->shape = std::move(shape);
    impl_->value.assign(shape_numel(impl_->shape), T(0));
    impl_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : impl_(std::make_shared<TensorImpl<T>>()) {
    if (shape_numel(shape) != data.size()) {
      throw std::invalid_argument("tensor data length does not match shape " +
                                  shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->value = std::move(data);
    impl_->requires_grad = requires_grad;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return Tensor(Shape{}, std::vector<T>{v}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->value.size(); }
  int dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(impl_->shape.size()); }

  std::vector<T>& data() { return impl_->value; }
  const std::vector<T>& data() const { return impl_->value; }
  std::vector<T>& grad() { return impl_->grad; }
  const std::vector<T>& grad() const { return impl_->grad; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }

  T item() const {
    if (numel() != 1) throw std::invalid_argument("item() on non-scalar tensor");
    return impl_->value[0];
  }

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

  // New view with the same data and a different shape of equal length.
  Tensor reshape(Shape new_shape) const {
    if (shape_numel(new_shape) != numel()) {
      throw std::invalid_argument("reshape: element count mismatch");
    }
    Tensor out(std::move(new_shape), impl_->value, false);
    if (impl_->requires_grad || impl_->backward_fn || !impl_->parents.empty()) {
      out.impl_->parents = {impl_};
      out.impl_->backward_fn = [](TensorImpl<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
      };
    }
    return out;
  }

  void zero_grad() { impl_->grad.assign(impl_->value.size(), T(0)); }

  // Construct a non-leaf result of an op.
  static Tensor make_result(Shape shape, std::vector<T> data,
                            std::vector<std::shared_ptr<TensorImpl<T>>> parents,
                            std::function<void(TensorImpl<T>&)> backward_fn) {
    Tensor out(std::move(shape), std::move(data), false);
    bool any = false;
    for (const auto& p : parents) {
      if (p->requires_grad || p->backward_fn || !p->parents.empty()) any = true;
    }
    if (any) {
      out.impl_->parents = std::move(parents);
      out.impl_->backward_fn = std::move(backward_fn);
    }
    return out;
  }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Reverse topological sweep from a scalar loss. Gradients accumulate into
// each reachable tensor's grad buffer; leaves with requires_grad end up with
// exact reverse-mode gradients.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar");
  }
  using Impl = TensorImpl<T>;
  std::vector<Impl*> order;
  std::unordered_set<Impl*> seen;
  // Iterative DFS; graphs for deep nets overflow the call stack otherwise.
  std::vector<std::pair<Impl*, std::size_t>> stack;
  stack.emplace_back(loss.impl().get(), 0);
  seen.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Impl* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // order is now a topological order (parents before children); walk it
  // backwards so each node's grad is complete before it propagates.
  loss.impl()->ensure_grad();
  loss.impl()->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = *it;
    if (node->backward_fn && !node->grad.empty()) {
      node->backward_fn(*node);
    }
  }
}

// Kaiming-normal initialization: zero mean, sigma = sqrt(2 / fan_in).
template <typename T>
Tensor<T> init_kaiming(const Shape& shape, int fan_in, Rng& rng) {
  if (fan_in < 1) throw std::invalid_argument("init_kaiming: fan_in must be >= 1");
  std::size_t n = shape_numel(shape);
  if (shape.empty() || n == 0) {
    throw std::invalid_argument("init_kaiming: zero-element shape");
  }
  const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<T> data(n);
  for (auto& v : data) v = static_cast<T>(sigma * rng.normal());
  return Tensor<T>(shape, std::move(data));
}

}  // namespace partnet
