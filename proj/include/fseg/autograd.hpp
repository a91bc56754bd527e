// Copyright 2026 The fseg Authors.
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

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fseg/tensor.hpp"

namespace fseg {

// A vertex of the reverse-mode graph. Leaves have no backward function.
// Interior nodes hold strong references to their inputs, so the graph stays
// alive exactly as long as its outputs do.
struct Node {
  Tensor value;
  Tensor grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Zero-initialized gradient buffer of input i, allocated on first use.
  Tensor& input_grad(std::size_t i);
  bool input_requires_grad(std::size_t i) const { return inputs[i]->requires_grad; }
  const Tensor& input_value(std::size_t i) const { return inputs[i]->value; }
};

// Handle to a graph node. Copies share the node.
class Variable {
 public:
  Variable() = default;
  explicit Variable(Tensor value, bool requires_grad = false);

  // Records an op result. The backward function reads `self.grad` and
  // accumulates into `self.input_grad(i)` for inputs that require grad. If
  // no input requires grad the result is a constant and `backward` is dropped.
  static Variable from_op(Tensor value, std::vector<Variable> inputs,
                          std::function<void(Node&)> backward);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient buffer; zeros of the value's shape if nothing was accumulated.
  Tensor grad() const;
  void zero_grad() { node_->grad = Tensor(); }

  // Reverse sweep from this (single-element) variable with seed 1. Interior
  // gradient buffers are released after use; leaf gradients accumulate.
  void backward() const;

  // Same value, detached from the graph.
  Variable detach() const { return Variable(node_->value, false); }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool previous_;
};

// Accumulates `g` into `dst`, allocating if `dst` is empty.
void accumulate(Tensor& dst, const Tensor& g);

}  // namespace fseg
