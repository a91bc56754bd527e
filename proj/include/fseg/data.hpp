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
#include <string>
#include <vector>

#include "fseg/tensor.hpp"

namespace fseg {

struct Sample {
  std::string patient_id;
  Tensor image;  // [C, H, W], values in [0, 1]
  Tensor mask;   // [1, H, W], values in {0, 1}
};

struct SplitSpec {
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetSplits {
  std::vector<Sample> train, val, test;
};

// Synthetic atrium-like slices. Each patient gets one randomized blob (a
// harmonically perturbed ellipse plus a protruding lobe) whose size and
// position vary smoothly across slices. Images combine the region with an
// intensity gradient, background texture, a multiplicative bias field and
// additive Gaussian noise (sigma 0.1), clamped to [0, 1].
std::vector<Sample> generate_synthetic(std::size_t num_patients, std::size_t slices_per_patient,
                                       std::size_t height, std::size_t width, std::uint64_t seed,
                                       std::size_t channels = 1);

// Patient-level partition: patients are shuffled with `split.seed`, val and
// test receive floor(n * fraction) patients, train the remainder. Sample
// order within a split follows the input order.
DatasetSplits split_patients(const std::vector<Sample>& samples, const SplitSpec& split);

std::vector<std::string> patient_ids(const std::vector<Sample>& samples);

// Stacks images (and masks) into [B, C, H, W] batches.
Tensor stack_images(const std::vector<const Sample*>& batch);
Tensor stack_masks(const std::vector<const Sample*>& batch);

double foreground_fraction(const Tensor& mask);
// 4-connected component count of the foreground of a [1, H, W] mask.
std::size_t count_components(const Tensor& mask);

}  // namespace fseg
