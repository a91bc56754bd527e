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

#include "fseg/autograd.hpp"

#include <unordered_set>

#include "fseg/error.hpp"

namespace fseg {

void accumulate(Tensor& dst, const Tensor& g) {
  if (dst.empty()) {
    dst = g;
    return;
  }
  if (dst.shape() != g.shape()) {
    throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match " +
                     shape_str(dst.shape()));
  }
  double* d = dst.raw();
  const double* s = g.raw();
  for (std::size_t i = 0, n = dst.numel(); i < n; ++i) d[i] += s[i];
}

namespace {
thread_local bool g_no_grad = false;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

Tensor& Node::input_grad(std::size_t i) {
  Node& in = *inputs[i];
  if (in.grad.empty()) in.grad = Tensor::zeros(in.value.shape());
  return in.grad;
}

Variable::Variable(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Variable Variable::from_op(Tensor value, std::vector<Variable> inputs,
                           std::function<void(Node&)> backward) {
  Variable out(std::move(value), false);
  if (g_no_grad) return out;
  bool any = false;
  for (const Variable& in : inputs) {
    if (in.defined() && in.requires_grad()) any = true;
  }
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs.reserve(inputs.size());
  for (Variable& in : inputs) {
    // Undefined optional operands become constant placeholders so that
    // backward functions can index inputs positionally.
    out.node_->inputs.push_back(in.defined() ? in.node_ : std::make_shared<Node>());
  }
  out.node_->backward = std::move(backward);
  return out;
}

Tensor Variable::grad() const {
  if (node_->grad.empty()) return Tensor::zeros(node_->value.shape());
  return node_->grad;
}

void Variable::backward() const {
  if (node_->value.numel() != 1) {
    throw ShapeError("backward() needs a single-element output, got " +
                     shape_str(node_->value.shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  accumulate(node_->grad, Tensor(node_->value.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward) continue;
    if (!n->grad.empty()) {
      n->backward(*n);
    }
    n->grad = Tensor();
  }
}

}  // namespace fseg
