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
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "fseg/data.hpp"
#include "fseg/model.hpp"
#include "fseg/optim.hpp"

namespace fseg {

struct TrainConfig {
  double lr = 5e-5;
  double beta1 = 0.90;
  double beta2 = 0.95;
  double weight_decay = 1e-4;
  std::size_t warmup_epochs = 5;
  std::size_t total_epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
  AdamWConfig optimizer() const { return {beta1, beta2, weight_decay, 1e-8}; }
};

// Per-step schedule: linear warmup reaching `lr` on the last warmup step,
// then cosine annealing that starts at `lr` and ends at exactly 0 on the
// final step.
double lr_at(std::size_t epoch, std::size_t step_in_epoch, std::size_t steps_per_epoch,
             const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_dice = 0.0;
  double lr = 0.0;  // rate used by the epoch's last step
  std::vector<double> fusion_weights;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::vector<Tensor> best_weights;  // SegmentationModel::snapshot() order
  std::size_t best_epoch = 0;
  double best_val_dice = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains the non-frozen parameters with AdamW. Samples are reshuffled every
// epoch from `config.seed`; the snapshot with the highest validation Dice
// (earliest on ties) is returned and also left loaded in `model`.
TrainResult train(SegmentationModel& model, const DatasetSplits& splits,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// epoch,train_loss,val_dice,lr,w_0..w_{n-1}
void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out);
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace fseg
