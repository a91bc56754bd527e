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

#include <filesystem>
#include <string>

#include "fseg/data.hpp"
#include "fseg/model.hpp"
#include "fseg/parameter.hpp"

namespace fseg::testing {

inline Tensor randn(const Shape& shape, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  return normal_tensor(shape, sd, rng);
}

// Fresh per-test scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// 16x16 images, patch 4, 4 blocks of width 16, two decoder stages.
inline ModelConfig tiny_model_config() {
  ModelConfig m;
  m.encoder.patch_size = 4;
  m.encoder.embed_dim = 16;
  m.encoder.num_blocks = 4;
  m.encoder.num_heads = 2;
  m.encoder.mlp_ratio = 2;
  m.encoder.image_height = m.encoder.image_width = 16;
  m.fusion.k = 2;
  m.decoder.stage_channels = {8, 4};
  m.decoder.image_adapter_channels = 2;
  return m;
}

}  // namespace fseg::testing
