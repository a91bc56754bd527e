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

#include <cstddef>
#include <vector>

#include "fseg/parameter.hpp"

namespace fseg {

struct AdamWConfig {
  double beta1 = 0.90;
  double beta2 = 0.95;
  double weight_decay = 1e-4;
  double eps = 1e-8;
};

// Adam with decoupled weight decay:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
// Frozen parameters are dropped at construction and never touched.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, const AdamWConfig& config);

  // Consumes the accumulated gradients. Throws NumericError, without
  // modifying any parameter, if a gradient is non-finite.
  void step(double lr);
  void zero_grad();

  std::size_t step_count() const { return t_; }
  std::size_t num_params() const { return params_.size(); }
  const Tensor& first_moment(std::size_t i) const { return m_[i]; }
  const Tensor& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Parameter*> params_;
  AdamWConfig config_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace fseg
