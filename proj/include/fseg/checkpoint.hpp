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
#include <memory>
#include <string>

#include "fseg/config.hpp"
#include "fseg/container.hpp"
#include "fseg/model.hpp"

namespace fseg {

struct CheckpointMeta {
  std::size_t epoch = 0;
  double val_dice = 0.0;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  Config config;
  CheckpointMeta meta;
  std::unique_ptr<SegmentationModel> model;
};

// Every model parameter under its own name, plus the full configuration
// (with the model section taken from `model`) and `meta` as key-value
// metadata.
TensorContainer make_checkpoint(const SegmentationModel& model, const Config& config,
                                const CheckpointMeta& meta);
void save_checkpoint(const SegmentationModel& model, const Config& config,
                     const CheckpointMeta& meta, const std::string& path);

// Rebuilds the model from the stored configuration and overwrites every
// parameter. Missing, duplicate, unknown or misshaped tensors raise
// LoadError.
Checkpoint checkpoint_from_container(const TensorContainer& container);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fseg
