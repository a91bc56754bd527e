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

#include <string>
#include <vector>

#include "fseg/data.hpp"
#include "fseg/model.hpp"

namespace fseg {

// 2|P n G| / (|P| + |G|) on binary masks; 1.0 when both are empty.
double dice(const Tensor& pred, const Tensor& gt);
// |P n G| / |P u G| on binary masks; 1.0 when both are empty.
double iou(const Tensor& pred, const Tensor& gt);

// sigmoid(logits) > 0.5 as a {0, 1} tensor.
Tensor threshold_logits(const Tensor& logits);

struct CaseMetrics {
  std::string patient_id;
  double dice = 0.0;
  double iou = 0.0;
};

struct MetricSummary {
  std::size_t count = 0;  // number of patients
  double mean_dice = 0.0;
  double std_dice = 0.0;
  double mean_iou = 0.0;
  double std_iou = 0.0;
  bool std_defined = false;  // false for a single patient; stds are then 0
};

// Averages the slices of each patient, in first-appearance order.
std::vector<CaseMetrics> per_patient(const std::vector<CaseMetrics>& cases);

// Patient-level mean and sample standard deviation (n - 1).
MetricSummary aggregate(const std::vector<CaseMetrics>& cases);

// Per-slice metrics of `model` on `samples`.
std::vector<CaseMetrics> evaluate_cases(const SegmentationModel& model,
                                        const std::vector<Sample>& samples,
                                        std::size_t batch_size = 8);

// Same, with encoder features precomputed per sample (see FeatureCache).
class FeatureCache;
std::vector<CaseMetrics> evaluate_cases(const SegmentationModel& model,
                                        const std::vector<Sample>& samples,
                                        const FeatureCache& cache, std::size_t batch_size = 8);

// Frozen-encoder outputs of every sample, one [N, D] tensor per block.
class FeatureCache {
 public:
  FeatureCache(const Encoder& encoder, const std::vector<Sample>& samples,
               std::size_t batch_size = 16);

  std::size_t size() const { return features_.size(); }
  // Stacked block features for the given sample indices.
  std::vector<BlockFeatures> gather(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<std::vector<Tensor>> features_;  // [sample][block] -> [N, D]
};

}  // namespace fseg
