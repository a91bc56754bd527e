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

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "fseg/encoder.hpp"

namespace fseg {

struct DecoderConfig {
  // Deep to shallow; one entry per stage.
  std::vector<std::size_t> stage_channels{64, 32, 16, 8};
  std::size_t image_adapter_channels = 8;
  std::size_t out_classes = 1;
  // Concatenate the adapted input image at every stage.
  bool spatial_integration = true;
  // Concatenate the fused features with the last block at the bottleneck.
  bool fused_bottleneck = true;

  std::size_t num_stages() const { return stage_channels.size(); }
  void validate(std::size_t skip_count) const;
};

// [B, N, D] -> [B, D, gh, gw]; token t lands at (t / gw, t % gw).
Variable tokens_to_map(const Variable& tokens, std::size_t grid_h, std::size_t grid_w);
// [B, D, gh, gw] -> [B, N, D].
Tensor map_to_tokens(const Tensor& map);

// 1x1 convolution to a reduced channel count, then bilinear resize.
Variable skip_project(const Variable& block_map, const Variable& weight, const Variable& bias,
                      std::size_t out_h, std::size_t out_w);

// 3x3 same-padding convolution followed by GELU.
Variable image_adapter(const Variable& image, const Variable& weight, const Variable& bias);

struct StageWeights {
  Variable conv_w, conv_b, up_w, up_b;
};

// concat(image, skip, prev) over channels -> 3x3 conv + GELU -> upsample2x.
// `image` may be undefined when spatial integration is off. All operands
// must already share prev's spatial size.
Variable decoder_stage(const Variable& prev, const Variable& skip, const Variable& image,
                       const StageWeights& weights);

// Spatial size after each stage: grid * 2^n for n = 1..num_stages.
std::vector<std::size_t> stage_resolutions(std::size_t grid, std::size_t num_stages);

struct DecoderOutput {
  Variable logits;  // [B, out_classes, H, W]
  std::vector<std::pair<std::size_t, std::size_t>> stage_sizes;
  std::vector<std::size_t> concat_channels;  // channel count entering each stage conv
  std::pair<std::size_t, std::size_t> head_size;  // before the final resize
};

class Decoder {
 public:
  Decoder(const EncoderConfig& encoder, const DecoderConfig& config, Rng& rng);

  const DecoderConfig& config() const { return config_; }

  // `selected` holds the skip blocks in ascending order; the deepest feeds
  // the first (coarsest) stage.
  DecoderOutput forward(const Variable& image, const std::vector<BlockFeatures>& features,
                        const Variable& fused, const std::vector<std::size_t>& selected) const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

 private:
  std::size_t add(std::string name, Tensor value);
  const Variable& param(std::size_t i) const { return params_[i].var; }

  EncoderConfig encoder_;
  DecoderConfig config_;
  std::vector<Parameter> params_;
  std::size_t adapter_w_ = 0, adapter_b_ = 0, bottleneck_w_ = 0, bottleneck_b_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> skips_;
  std::vector<std::array<std::size_t, 4>> stages_;
  std::size_t head_w_ = 0, head_b_ = 0;
};

}  // namespace fseg
