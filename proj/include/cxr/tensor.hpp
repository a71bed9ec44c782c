// Copyright (c) 2026 The cxrformer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cxr {

using Index = std::int64_t;
using Shape = std::vector<Index>;

Index numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Whether newly created results record their inputs for backward.
/// Thread-local; toggled with NoGradGuard.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

template <typename T>
struct Node {
  using BackwardFn = std::function<void(Node&)>;

  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  /// Reads this->grad and accumulates into inputs[i]->grad for every input
  /// that requires grad.
  BackwardFn backward;
  const char* op = "leaf";

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor handle. Copies share the underlying node, so a
/// parameter held by a model and by an optimizer is the same storage.
///
/// Data is fixed after construction; only the grad buffer changes, plus the
/// explicit mutable_data() escape hatch used by initializers and the
/// optimizer (the single writer).
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = detail::Node<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  /// Extent along `axis`; negative axes count from the back.
  Index dim(int axis) const;
  Index numel() const { return static_cast<Index>(node_->data.size()); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  T item() const;
  T at(std::initializer_list<Index> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }
  const char* op_name() const { return node_->op; }

  /// Same values, new leaf without history.
  Tensor detach() const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(node_->data.begin(), node_->data.end());
    return Tensor<U>(node_->shape, std::move(out));
  }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds an op result. Inputs and the backward closure are recorded only
/// when grad mode is on and some input requires grad.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const std::vector<Tensor<T>>& inputs,
                      typename detail::Node<T>::BackwardFn backward_fn, const char* op);

/// Ordered record of the graph reachable from a root: every node appears
/// after all of its (grad-requiring) inputs, and exactly once.
template <typename T>
class Tape {
 public:
  static Tape record(const Tensor<T>& root);

  const std::vector<Tensor<T>>& nodes() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<Tensor<T>> order_;
};

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate (+=);
/// callers zero them between steps. The tape is consumed: interior nodes
/// drop their history, so a second backward on the same loss is an error.
template <typename T>
void backward(const Tensor<T>& loss);

}  // namespace cxr
