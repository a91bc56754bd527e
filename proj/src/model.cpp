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

#include "fseg/model.hpp"

#include "fseg/error.hpp"

namespace fseg {

void ModelConfig::validate() const {
  encoder.validate();
  fusion.validate(encoder.num_blocks);
  decoder.validate(fusion.k);
}

SegmentationModel::SegmentationModel(const ModelConfig& config, std::uint64_t seed)
    : config_((config.validate(), config)),
      seed_(seed),
      rng_(seed),
      encoder_(config_.encoder, rng_),
      fusion_(config_.fusion, config_.encoder.num_blocks, rng_),
      decoder_(config_.encoder, config_.decoder, rng_) {}

SegmentationModel::Output SegmentationModel::forward(const Tensor& images) const {
  Variable x(images, false);
  return forward(x, encoder_.forward(x));
}

SegmentationModel::Output SegmentationModel::forward(
    const Variable& images, const std::vector<BlockFeatures>& features) const {
  Output out;
  Variable w = fusion_.weights();
  out.weights = w.value();
  out.selected = fusion_.select(out.weights);
  Variable fused;
  if (config_.decoder.fused_bottleneck) fused = fuse_features(features, w);
  out.decoder = decoder_.forward(images, features, fused, out.selected);
  return out;
}

std::vector<Parameter*> SegmentationModel::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : encoder_.parameters()) out.push_back(&p);
  out.push_back(&fusion_.theta());
  for (Parameter& p : decoder_.parameters()) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> SegmentationModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const Parameter& p : encoder_.parameters()) out.push_back(&p);
  out.push_back(&fusion_.theta());
  for (const Parameter& p : decoder_.parameters()) out.push_back(&p);
  return out;
}

std::vector<Parameter*> SegmentationModel::trainable() {
  std::vector<Parameter*> out;
  for (Parameter* p : parameters()) {
    if (!p->frozen) out.push_back(p);
  }
  return out;
}

std::vector<Tensor> SegmentationModel::snapshot() const {
  std::vector<Tensor> out;
  for (const Parameter* p : parameters()) out.push_back(p->var.value());
  return out;
}

void SegmentationModel::restore(const std::vector<Tensor>& values) {
  auto params = parameters();
  if (values.size() != params.size()) {
    throw ShapeError("restore: " + std::to_string(values.size()) + " tensors for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (values[i].shape() != params[i]->var.shape()) {
      throw ShapeError("restore: shape mismatch for " + params[i]->name);
    }
    params[i]->var.mutable_value() = values[i];
  }
}

void SegmentationModel::freeze_all() {
  for (Parameter* p : parameters()) p->set_frozen(true);
}

}  // namespace fseg
