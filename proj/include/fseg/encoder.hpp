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

#include "fseg/parameter.hpp"

namespace fseg {

struct EncoderConfig {
  std::size_t patch_size = 8;
  std::size_t embed_dim = 64;
  std::size_t num_blocks = 8;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t image_height = 64;
  std::size_t image_width = 64;
  std::size_t in_channels = 1;

  // Throws ConfigError on any violated invariant.
  void validate() const;

  std::size_t grid_h() const { return image_height / patch_size; }
  std::size_t grid_w() const { return image_width / patch_size; }
  std::size_t num_tokens() const { return grid_h() * grid_w(); }
  std::size_t patch_dim() const { return patch_size * patch_size * in_channels; }

  // Desk-scale stand-ins for the ViT-B/L/g family ("base", "large", "giant")
  // and the full-size "vitb14", "vitl14", "vitg14" geometries at 448x448.
  static EncoderConfig preset(const std::string& name);
};

// Token features emitted by one transformer block.
struct BlockFeatures {
  std::size_t block_index = 0;
  Variable tokens;  // [B, N, D]
};

// [B, C, H, W] -> [B, N, P*P*C]. Patches are enumerated row-major over the
// grid; within a patch values run channel-major, then row-major.
Tensor patchify(const Tensor& images, std::size_t patch_size);
// Exact inverse of patchify.
Tensor depatchify(const Tensor& patches, std::size_t channels, std::size_t height,
                  std::size_t width, std::size_t patch_size);

// patches[B, N, P*P*C] * projection[P*P*C, D] + bias[D] + positional[N, D].
Variable embed_patches(const Variable& patches, const Variable& projection,
                       const Variable& bias, const Variable& positional);

// Frozen pre-norm ViT encoder without class or register tokens.
class Encoder {
 public:
  // Random initialization as in the reference ViT: Xavier-uniform attention
  // and MLP kernels, LeCun-normal patch projection, positional table
  // N(0, 0.02^2), layer-norm scales 1 and all biases 0.
  Encoder(const EncoderConfig& config, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  // One BlockFeatures per block, shallow to deep.
  std::vector<BlockFeatures> forward(const Tensor& images) const;
  std::vector<BlockFeatures> forward(const Variable& images) const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

  // Encoder-only weight containers (see container.hpp). Loading requires
  // the exact set of names and shapes this encoder declares.
  void save_weights(const std::string& path) const;
  void load_weights(const std::string& path);

 private:
  const Variable& param(std::size_t index) const { return params_[index].var; }
  std::size_t add(std::string name, Tensor value);

  struct BlockSlots {
    std::size_t norm1_w, norm1_b, q_w, q_b, k_w, k_b, v_w, v_b, proj_w, proj_b;
    std::size_t norm2_w, norm2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

  EncoderConfig config_;
  std::vector<Parameter> params_;
  std::size_t patch_w_ = 0, patch_b_ = 0, pos_ = 0;
  std::vector<BlockSlots> blocks_;
};

}  // namespace fseg
