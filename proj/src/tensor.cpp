// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/tensor.hpp"

#include <unordered_set>

namespace dacg {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  node_->shape = shape;
  node_->data.assign(shape.numel(), fill);
  node_->requires_grad = requires_grad;
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : node_(std::make_shared<Node<T>>()) {
  if (values.size() != shape.numel()) {
    throw DimensionError("tensor: " + std::to_string(values.size()) + " values for shape " +
                         shape.str());
  }
  node_->shape = shape;
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

template <class T>
std::vector<T> Tensor<T>::grad() const {
  if (node_->grad.empty()) return std::vector<T>(node_->data.size(), T(0));
  return node_->grad;
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape().str());
  return node_->data[0];
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor<T>(node_->shape, node_->data, false);
}

template <class T>
void Tensor<T>::backward() const {
  if (numel() != 1) throw UsageError("backward() requires a scalar, got " + shape().str());
  if (!node_->requires_grad) throw UsageError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad().assign(1, T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  for (Node<T>* node : order) {
    if (!node->is_leaf()) {
      node->backward_fn = nullptr;
      node->parents.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

template <class T>
OpResult<T>::OpResult(const char* op, Shape shape, std::initializer_list<const Tensor<T>*> inputs)
    : node_(std::make_shared<Node<T>>()) {
  node_->op = op;
  node_->shape = shape;
  node_->data.assign(shape.numel(), T(0));
  if (!grad_enabled()) return;
  for (const Tensor<T>* in : inputs) {
    if (in != nullptr && in->defined() && in->requires_grad()) {
      node_->requires_grad = true;
      break;
    }
  }
  if (node_->requires_grad) {
    for (const Tensor<T>* in : inputs) {
      if (in != nullptr && in->defined()) node_->parents.push_back(in->node());
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class OpResult<float>;
template class OpResult<double>;

}  // namespace dacg
