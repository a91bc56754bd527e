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

#include "fseg/loss.hpp"

#include <cmath>

#include "fseg/error.hpp"
#include "fseg/ops.hpp"

namespace fseg {

namespace {

void check_target(const Variable& logits, const Tensor& target, const char* op) {
  if (logits.shape() != target.shape()) {
    throw ShapeError(std::string(op) + ": logits " + shape_str(logits.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  for (double t : target.data()) {
    if (t != 0.0 && t != 1.0) throw ContractError(std::string(op) + ": target must be binary");
  }
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Variable bce_with_logits(const Variable& logits, const Tensor& target) {
  check_target(logits, target, "bce_with_logits");
  const Tensor& x = logits.value();
  const double inv_n = 1.0 / static_cast<double>(x.numel());
  double total = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    total += std::max(x[i], 0.0) - x[i] * target[i] + std::log1p(std::exp(-std::abs(x[i])));
  }
  return Variable::from_op(Tensor::scalar(total * inv_n), {logits}, [target, inv_n](Node& self) {
    const Tensor& x = self.input_value(0);
    Tensor& g = self.input_grad(0);
    const double seed = self.grad[0] * inv_n;
    for (std::size_t i = 0; i < x.numel(); ++i) g[i] += seed * (sigmoid(x[i]) - target[i]);
  });
}

Variable soft_dice_loss(const Variable& logits, const Tensor& target, double smooth) {
  check_target(logits, target, "soft_dice_loss");
  const Tensor& x = logits.value();
  const std::size_t batch = x.dim(0);
  const std::size_t per = x.numel() / batch;
  Tensor probs(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) probs[i] = sigmoid(x[i]);
  std::vector<double> inter(batch, 0.0), denom(batch, 0.0);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      inter[b] += probs[i] * target[i];
      denom[b] += probs[i] + target[i];
    }
    loss += 1.0 - (2.0 * inter[b] + smooth) / (denom[b] + smooth);
  }
  const double inv_b = 1.0 / static_cast<double>(batch);
  return Variable::from_op(
      Tensor::scalar(loss * inv_b), {logits},
      [=, probs = std::move(probs)](Node& self) {
        Tensor& g = self.input_grad(0);
        const double seed = self.grad[0] * inv_b;
        for (std::size_t b = 0; b < batch; ++b) {
          const double s = denom[b] + smooth;
          const double num = 2.0 * inter[b] + smooth;
          for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
            const double ddice_dp = (2.0 * target[i] * s - num) / (s * s);
            g[i] -= seed * ddice_dp * probs[i] * (1.0 - probs[i]);
          }
        }
      });
}

Variable segmentation_loss(const Variable& logits, const Tensor& target) {
  return ops::add(ops::scale(bce_with_logits(logits, target), 0.5),
                  ops::scale(soft_dice_loss(logits, target), 0.5));
}

}  // namespace fseg
