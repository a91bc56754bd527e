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

#include "fseg/fusion.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "fseg/error.hpp"
#include "fseg/ops.hpp"

namespace fseg {

std::string to_string(SelectionMode mode) {
  return mode == SelectionMode::learned_topk ? "learned_topk" : "fixed_list";
}

SelectionMode parse_selection_mode(const std::string& text) {
  if (text == "learned_topk") return SelectionMode::learned_topk;
  if (text == "fixed_list") return SelectionMode::fixed_list;
  throw ConfigError("unknown selection mode '" + text + "' (learned_topk | fixed_list)");
}

void FusionConfig::validate(std::size_t num_blocks) const {
  if (k == 0 || k > num_blocks) {
    throw ConfigError("fusion: k = " + std::to_string(k) + " must lie in [1, " +
                      std::to_string(num_blocks) + "]");
  }
  if (mode != SelectionMode::fixed_list) return;
  if (fixed_blocks.size() != k) {
    throw ConfigError("fusion: fixed_blocks lists " + std::to_string(fixed_blocks.size()) +
                      " blocks but k = " + std::to_string(k));
  }
  std::set<std::size_t> seen;
  for (std::size_t b : fixed_blocks) {
    if (b >= num_blocks) {
      throw ConfigError("fusion: fixed block " + std::to_string(b) + " out of range for " +
                        std::to_string(num_blocks) + " blocks");
    }
    if (!seen.insert(b).second) {
      throw ConfigError("fusion: fixed block " + std::to_string(b) + " listed twice");
    }
  }
}

Variable normalize_weights(const Variable& theta) { return ops::softmax(theta); }

Variable fuse_features(const std::vector<BlockFeatures>& features, const Variable& weights) {
  if (features.empty()) throw ShapeError("fuse_features: no block features");
  if (weights.value().rank() != 1 || weights.dim(0) != features.size()) {
    throw ShapeError("fuse_features: " + std::to_string(features.size()) +
                     " blocks but weights " + shape_str(weights.shape()));
  }
  const Shape& shape = features.front().tokens.shape();
  for (const BlockFeatures& f : features) {
    if (f.tokens.shape() != shape) {
      throw ShapeError("fuse_features: block " + std::to_string(f.block_index) + " has shape " +
                       shape_str(f.tokens.shape()) + ", expected " + shape_str(shape));
    }
  }
  const std::size_t n = shape_numel(shape);
  const std::size_t blocks = features.size();
  Tensor out(shape, 0.0);
  for (std::size_t i = 0; i < blocks; ++i) {
    const double wi = weights.value()[i];
    const double* f = features[i].tokens.value().raw();
    for (std::size_t j = 0; j < n; ++j) out[j] += wi * f[j];
  }
  std::vector<Variable> inputs{weights};
  for (const BlockFeatures& f : features) inputs.push_back(f.tokens);
  return Variable::from_op(std::move(out), std::move(inputs), [blocks, n](Node& self) {
    const Tensor& w = self.input_value(0);
    const double* g = self.grad.raw();
    for (std::size_t i = 0; i < blocks; ++i) {
      if (self.input_requires_grad(0)) {
        const double* f = self.input_value(i + 1).raw();
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[j] * f[j];
        self.input_grad(0)[i] += dot;
      }
      if (self.input_requires_grad(i + 1)) {
        double* gf = self.input_grad(i + 1).raw();
        for (std::size_t j = 0; j < n; ++j) gf[j] += w[i] * g[j];
      }
    }
  });
}

std::vector<std::size_t> select_top_k(const Tensor& weights, std::size_t k) {
  const std::size_t n = weights.numel();
  if (k == 0 || k > n) {
    throw ConfigError("select_top_k: k = " + std::to_string(k) + " out of range [1, " +
                      std::to_string(n) + "]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return a > b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

Fusion::Fusion(const FusionConfig& config, std::size_t num_blocks, Rng& rng)
    : config_(config), theta_("fusion.theta", normal_tensor({num_blocks}, 0.01, rng), false) {
  config_.validate(num_blocks);
}

std::vector<std::size_t> Fusion::select(const Tensor& weights) const {
  if (config_.mode == SelectionMode::fixed_list) {
    std::vector<std::size_t> blocks = config_.fixed_blocks;
    std::sort(blocks.begin(), blocks.end());
    return blocks;
  }
  return select_top_k(weights, config_.k);
}

}  // namespace fseg
