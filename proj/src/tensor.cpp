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

#include "cxr/tensor.hpp"

#include <unordered_set>
#include <utility>

#include "cxr/error.hpp"

namespace cxr {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<Node>()) {
  for (Index d : shape)
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  node_->data.assign(static_cast<std::size_t>(cxr::numel(shape)), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  for (Index d : shape)
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  if (cxr::numel(shape) != static_cast<Index>(data.size()))
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
Index Tensor<T>::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r)
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape()));
  return node_->shape[static_cast<std::size_t>(a)];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<Index> index) const {
  if (static_cast<int>(index.size()) != rank())
    throw ShapeError("index rank does not match shape " + shape_str(shape()));
  Index off = 0;
  std::size_t i = 0;
  for (Index v : index) {
    const Index extent = node_->shape[i++];
    if (v < 0 || v >= extent) throw ShapeError("index out of range for " + shape_str(shape()));
    off = off * extent + v;
  }
  return node_->data[static_cast<std::size_t>(off)];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data);
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const std::vector<Tensor<T>>& inputs,
                      typename detail::Node<T>::BackwardFn backward_fn, const char* op) {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled)
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tape<T> Tape<T>::record(const Tensor<T>& root) {
  using NodePtr = std::shared_ptr<detail::Node<T>>;
  Tape tape;
  std::unordered_set<const detail::Node<T>*> visited;
  // Iterative post-order DFS; the graph can be deep (one node per op).
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodePtr child = node->inputs[next++];
      if (child->requires_grad && visited.insert(child.get()).second) stack.emplace_back(child, 0);
    } else {
      tape.order_.emplace_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined()) throw Error("backward: undefined loss");
  if (loss.numel() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad())
    throw Error("backward: loss is detached (not on a gradient tape)");

  const Tape<T> tape = Tape<T>::record(loss);
  loss.node()->ensure_grad()[0] += T(1);
  const auto& order = tape.nodes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& node = *it->node();
    if (node.backward && !node.grad.empty()) node.backward(node);
  }
  for (const auto& t : order) {
    auto& node = *t.node();
    if (!node.backward) continue;  // leaf: keep its accumulated grad
    node.backward = nullptr;
    node.inputs.clear();
    node.requires_grad = false;
    node.grad.clear();
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template Tensor<float> make_result(Shape, std::vector<float>, const std::vector<Tensor<float>>&,
                                   detail::Node<float>::BackwardFn, const char*);
template Tensor<double> make_result(Shape, std::vector<double>, const std::vector<Tensor<double>>&,
                                    detail::Node<double>::BackwardFn, const char*);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace cxr
