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
#include <string>
#include <vector>

#include "fseg/encoder.hpp"

namespace fseg {

enum class SelectionMode { learned_topk, fixed_list };

std::string to_string(SelectionMode mode);
SelectionMode parse_selection_mode(const std::string& text);

struct FusionConfig {
  std::size_t k = 4;
  SelectionMode mode = SelectionMode::learned_topk;
  // 0-based block indices, used in fixed_list mode.
  std::vector<std::size_t> fixed_blocks;

  void validate(std::size_t num_blocks) const;
};

// w = softmax(theta).
Variable normalize_weights(const Variable& theta);

// sum_i w_i * F_i over blocks, differentiable in w and every F_i.
Variable fuse_features(const std::vector<BlockFeatures>& features, const Variable& weights);

// Indices of the k largest weights, ties resolved toward the deeper block,
// returned in ascending order.
std::vector<std::size_t> select_top_k(const Tensor& weights, std::size_t k);

// Learnable per-block importance logits.
class Fusion {
 public:
  // theta_i ~ N(0, 0.01^2).
  Fusion(const FusionConfig& config, std::size_t num_blocks, Rng& rng);

  const FusionConfig& config() const { return config_; }
  std::size_t num_blocks() const { return theta_.var.value().numel(); }

  // Recomputed on every call; never cached.
  Variable weights() const { return normalize_weights(theta_.var); }

  // Blocks routed to the decoder skips, ascending.
  std::vector<std::size_t> select(const Tensor& weights) const;

  Parameter& theta() { return theta_; }
  const Parameter& theta() const { return theta_; }

 private:
  FusionConfig config_;
  Parameter theta_;
};

}  // namespace fseg
