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

#include <cstdint>
#include <vector>

#include "fseg/decoder.hpp"
#include "fseg/fusion.hpp"

namespace fseg {

struct ModelConfig {
  EncoderConfig encoder;
  FusionConfig fusion;
  DecoderConfig decoder;

  void validate() const;
};

// Frozen encoder + learnable block fusion + UNet-style decoder.
class SegmentationModel {
 public:
  // Weights are drawn from a single stream seeded with `seed`, in the order
  // encoder, fusion, decoder.
  SegmentationModel(const ModelConfig& config, std::uint64_t seed);

  SegmentationModel(const SegmentationModel&) = delete;
  SegmentationModel& operator=(const SegmentationModel&) = delete;

  struct Output {
    DecoderOutput decoder;
    Tensor weights;                     // softmax(theta) for this pass
    std::vector<std::size_t> selected;  // skip blocks, ascending
  };

  Output forward(const Tensor& images) const;
  // Reuses precomputed encoder features for the same images.
  Output forward(const Variable& images, const std::vector<BlockFeatures>& features) const;

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  Fusion& fusion() { return fusion_; }
  const Fusion& fusion() const { return fusion_; }
  Decoder& decoder() { return decoder_; }
  const Decoder& decoder() const { return decoder_; }

  // Every parameter in encoder, fusion, decoder order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<Parameter*> trainable();

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

  void freeze_all();

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  Rng rng_;
  Encoder encoder_;
  Fusion fusion_;
  Decoder decoder_;
};

}  // namespace fseg
