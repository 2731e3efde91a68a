// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dacg/errors.hpp"

namespace dacg {

/// N x C x H x W extents. Vectors and matrices are carried as (n, d, 1, 1).
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

template <class T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until touched by a backward pass
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return parents.empty(); }
  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

bool grad_enabled();

/// Disables graph recording for its lifetime (inference, optimizer updates).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Reference-counted handle to a node in the define-by-run graph.
///
/// Copies share storage. Every op records its inputs and a backward closure
/// when recording is enabled and at least one input requires a gradient.
/// backward() runs a topological reverse sweep and then releases the recorded
/// graph: interior nodes drop their parents and closures, leaves keep .grad.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor scalar(T v, bool requires_grad = false) { return Tensor(Shape{}, v, requires_grad); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  std::vector<T>& values() & { return node_->data; }
  const std::vector<T>& values() const& { return node_->data; }
  // A temporary tensor may own the only reference to its node; copy out.
  std::vector<T> values() const&& { return node_->data; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; all zeros if backward never reached this tensor.
  std::vector<T> grad() const;
  std::vector<T>& grad_buffer() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  T item() const;
  T at(int n, int c, int h, int w) const { return node_->data[index(n, c, h, w)]; }
  T& at(int n, int c, int h, int w) { return node_->data[index(n, c, h, w)]; }
  std::size_t index(int n, int c, int h, int w) const {
    const Shape& s = node_->shape;
    return ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
  }

  /// Seeds d(this)/d(this) = 1 and propagates to every recorded ancestor.
  void backward() const;

  /// Same values, no history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const char* op_name() const { return node_->op; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Creates the output node of an op. The node records `inputs` only when
/// gradients can flow; callers attach backward_fn when recording() is true.
template <class T>
class OpResult {
 public:
  OpResult(const char* op, Shape shape, std::initializer_list<const Tensor<T>*> inputs);
  bool recording() const { return node_->requires_grad; }
  std::vector<T>& out() { return node_->data; }
  void set_backward(std::function<void(Node<T>&)> fn) {
    if (recording()) node_->backward_fn = std::move(fn);
  }
  Tensor<T> tensor() && { return Tensor<T>(std::move(node_)); }

 private:
  std::shared_ptr<Node<T>> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class OpResult<float>;
extern template class OpResult<double>;

}  // namespace dacg
