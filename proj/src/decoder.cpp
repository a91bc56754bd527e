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

#include "fseg/decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "fseg/error.hpp"
#include "fseg/ops.hpp"

namespace fseg {

void DecoderConfig::validate(std::size_t skip_count) const {
  if (stage_channels.empty()) throw ConfigError("decoder: at least one stage is required");
  if (num_stages() != skip_count) {
    throw ConfigError("decoder: " + std::to_string(num_stages()) + " stages but " +
                      std::to_string(skip_count) + " selected skip blocks");
  }
  for (std::size_t c : stage_channels) {
    if (c == 0) throw ConfigError("decoder: stage channels must be positive");
  }
  if (spatial_integration && image_adapter_channels == 0) {
    throw ConfigError("decoder: image_adapter_channels must be positive");
  }
  if (out_classes == 0) throw ConfigError("decoder: out_classes must be positive");
}

Variable tokens_to_map(const Variable& tokens, std::size_t grid_h, std::size_t grid_w) {
  if (tokens.value().rank() != 3 || tokens.dim(1) != grid_h * grid_w) {
    throw ShapeError("tokens_to_map: " + shape_str(tokens.shape()) + " does not fit a " +
                     std::to_string(grid_h) + "x" + std::to_string(grid_w) + " grid");
  }
  const std::size_t b = tokens.dim(0);
  const std::size_t d = tokens.dim(2);
  return ops::reshape(ops::transpose_last2(tokens), {b, d, grid_h, grid_w});
}

Tensor map_to_tokens(const Tensor& map) {
  if (map.rank() != 4) throw ShapeError("map_to_tokens: expected [B, D, h, w]");
  const std::size_t b = map.dim(0), d = map.dim(1), n = map.dim(2) * map.dim(3);
  Tensor out({b, n, d});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t t = 0; t < n; ++t) out[(i * n + t) * d + c] = map[(i * d + c) * n + t];
    }
  }
  return out;
}

Variable skip_project(const Variable& block_map, const Variable& weight, const Variable& bias,
                      std::size_t out_h, std::size_t out_w) {
  if (weight.value().rank() != 4 || weight.dim(2) != 1 || weight.dim(3) != 1) {
    throw ShapeError("skip_project: expected a 1x1 kernel, got " + shape_str(weight.shape()));
  }
  return ops::resize_bilinear(ops::conv2d(block_map, weight, bias), out_h, out_w);
}

Variable image_adapter(const Variable& image, const Variable& weight, const Variable& bias) {
  return ops::gelu(ops::conv2d(image, weight, bias, {1, ops::same_padding(weight.dim(2))}));
}

Variable decoder_stage(const Variable& prev, const Variable& skip, const Variable& image,
                       const StageWeights& w) {
  auto spatial = [](const Variable& v) { return std::make_pair(v.dim(2), v.dim(3)); };
  if (spatial(skip) != spatial(prev) || (image.defined() && spatial(image) != spatial(prev))) {
    throw std::logic_error("decoder_stage: concatenation operands differ in spatial size");
  }
  std::vector<Variable> parts;
  if (image.defined()) parts.push_back(image);
  parts.push_back(skip);
  parts.push_back(prev);
  Variable x = ops::concat_channels(parts);
  x = ops::gelu(ops::conv2d(x, w.conv_w, w.conv_b, {1, ops::same_padding(w.conv_w.dim(2))}));
  return ops::upsample2x(x, w.up_w, w.up_b);
}

std::vector<std::size_t> stage_resolutions(std::size_t grid, std::size_t num_stages) {
  std::vector<std::size_t> out;
  std::size_t r = grid;
  for (std::size_t n = 1; n <= num_stages; ++n) {
    r *= 2;
    out.push_back(r);
  }
  return out;
}

std::size_t Decoder::add(std::string name, Tensor value) {
  params_.emplace_back("decoder." + std::move(name), std::move(value), false);
  return params_.size() - 1;
}

namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  return normal_tensor(std::move(shape), std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
}

}  // namespace

Decoder::Decoder(const EncoderConfig& encoder, const DecoderConfig& config, Rng& rng)
    : encoder_(encoder), config_(config) {
  config_.validate(config_.num_stages());
  const std::size_t d = encoder_.embed_dim;
  const std::size_t c_img = config_.spatial_integration ? config_.image_adapter_channels : 0;
  const auto& ch = config_.stage_channels;
  if (config_.spatial_integration) {
    const std::size_t c = encoder_.in_channels;
    adapter_w_ = add("image_adapter.weight", he_normal({c_img, c, 3, 3}, c * 9, rng));
    adapter_b_ = add("image_adapter.bias", Tensor::zeros({c_img}));
  }
  const std::size_t bottleneck_in = config_.fused_bottleneck ? 2 * d : d;
  bottleneck_w_ = add("bottleneck.weight", he_normal({ch[0], bottleneck_in, 1, 1}, bottleneck_in, rng));
  bottleneck_b_ = add("bottleneck.bias", Tensor::zeros({ch[0]}));
  for (std::size_t j = 0; j < ch.size(); ++j) {
    const std::string pre = "skip." + std::to_string(j) + ".";
    const std::size_t w = add(pre + "weight", he_normal({ch[j], d, 1, 1}, d, rng));
    const std::size_t b = add(pre + "bias", Tensor::zeros({ch[j]}));
    skips_.emplace_back(w, b);
  }
  for (std::size_t j = 0; j < ch.size(); ++j) {
    const std::string pre = "stage." + std::to_string(j) + ".";
    const std::size_t prev = j == 0 ? ch[0] : ch[j - 1];
    const std::size_t in = c_img + ch[j] + prev;
    std::array<std::size_t, 4> s{};
    s[0] = add(pre + "conv.weight", he_normal({ch[j], in, 3, 3}, in * 9, rng));
    s[1] = add(pre + "conv.bias", Tensor::zeros({ch[j]}));
    s[2] = add(pre + "up.weight",
               normal_tensor({ch[j], ch[j], 2, 2}, 1.0 / std::sqrt(static_cast<double>(ch[j])), rng));
    s[3] = add(pre + "up.bias", Tensor::zeros({ch[j]}));
    stages_.push_back(s);
  }
  const std::size_t last = ch.back();
  head_w_ = add("head.weight", he_normal({config_.out_classes, last, 3, 3}, last * 9, rng));
  head_b_ = add("head.bias", Tensor::zeros({config_.out_classes}));
}

DecoderOutput Decoder::forward(const Variable& image, const std::vector<BlockFeatures>& features,
                               const Variable& fused,
                               const std::vector<std::size_t>& selected) const {
  if (features.size() != encoder_.num_blocks) {
    throw ShapeError("decoder: expected " + std::to_string(encoder_.num_blocks) +
                     " block features, got " + std::to_string(features.size()));
  }
  if (selected.size() != config_.num_stages()) {
    throw ConfigError("decoder: " + std::to_string(selected.size()) + " skip blocks for " +
                      std::to_string(config_.num_stages()) + " stages");
  }
  const std::size_t gh = encoder_.grid_h();
  const std::size_t gw = encoder_.grid_w();
  DecoderOutput out;

  Variable adapted;
  if (config_.spatial_integration) {
    adapted = image_adapter(image, param(adapter_w_), param(adapter_b_));
  }

  Variable bottleneck = tokens_to_map(features.back().tokens, gh, gw);
  if (config_.fused_bottleneck) {
    bottleneck = ops::concat_channels({bottleneck, tokens_to_map(fused, gh, gw)});
  }
  Variable x = ops::conv2d(bottleneck, param(bottleneck_w_), param(bottleneck_b_));

  for (std::size_t j = 0; j < config_.num_stages(); ++j) {
    const std::size_t h = x.dim(2);
    const std::size_t w = x.dim(3);
    const std::size_t block = selected[selected.size() - 1 - j];
    if (block >= features.size()) {
      throw ConfigError("decoder: selected block " + std::to_string(block) + " out of range");
    }
    Variable skip = skip_project(tokens_to_map(features[block].tokens, gh, gw),
                                 param(skips_[j].first), param(skips_[j].second), h, w);
    Variable img;
    if (adapted.defined()) img = ops::resize_bilinear(adapted, h, w);
    out.concat_channels.push_back((img.defined() ? img.dim(1) : 0) + skip.dim(1) + x.dim(1));
    const auto& s = stages_[j];
    x = decoder_stage(x, skip, img, {param(s[0]), param(s[1]), param(s[2]), param(s[3])});
    out.stage_sizes.emplace_back(x.dim(2), x.dim(3));
  }

  x = ops::conv2d(x, param(head_w_), param(head_b_), {1, ops::same_padding(3)});
  out.head_size = {x.dim(2), x.dim(3)};
  out.logits = ops::resize_bilinear(x, encoder_.image_height, encoder_.image_width);
  return out;
}

}  // namespace fseg
