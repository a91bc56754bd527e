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

#include "fseg/optim.hpp"

#include <cmath>

#include "fseg/error.hpp"

namespace fseg {

AdamW::AdamW(std::vector<Parameter*> params, const AdamWConfig& config) : config_(config) {
  if (config_.beta1 < 0 || config_.beta1 >= 1 || config_.beta2 < 0 || config_.beta2 >= 1) {
    throw ConfigError("AdamW: betas must lie in [0, 1)");
  }
  for (Parameter* p : params) {
    if (p->frozen) continue;
    params_.push_back(p);
    m_.push_back(Tensor::zeros(p->var.shape()));
    v_.push_back(Tensor::zeros(p->var.shape()));
  }
}

void AdamW::step(double lr) {
  for (const Parameter* p : params_) {
    if (p->var.has_grad() && !p->var.node().grad.all_finite()) {
      throw NumericError("AdamW: non-finite gradient in parameter '" + p->name + "' at step " +
                         std::to_string(t_ + 1));
    }
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (p.frozen) continue;
    Tensor& value = p.var.mutable_value();
    const Tensor& grad = p.var.node().grad;
    const bool has_grad = !grad.empty();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double g = has_grad ? grad[i] : 0.0;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * value[i]);
    }
  }
}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->var.zero_grad();
}

}  // namespace fseg
