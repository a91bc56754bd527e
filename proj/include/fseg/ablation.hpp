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
#include "fseg/training.hpp"

namespace fseg {

enum class BlockSelection { last_4, fixed_list, learned_topk };

std::string to_string(BlockSelection selection);
BlockSelection parse_block_selection(const std::string& text);

struct AblationConfig {
  BlockSelection selection = BlockSelection::last_4;
  bool spatial_integration = true;
  std::string encoder_preset = "base";  // base, large or giant

  // `base` with the encoder preset, skip selection and integration flag
  // replaced. fixed_list routes blocks 7, 5, 3, 1 (1-based); last_4 the
  // four deepest blocks; learned_topk the four highest fusion weights.
  ModelConfig apply(const ModelConfig& base) const;
  std::string label() const;
};

// Selection (last_4, fixed_list) x integration (yes, no) for each preset.
std::vector<AblationConfig> ablation_grid(const std::vector<std::string>& presets = {"base"});

struct AblationRow {
  AblationConfig config;
  std::vector<std::uint64_t> seeds;
  std::vector<double> seed_dice;      // test mean Dice per seed
  std::vector<double> patient_dice;   // per-patient test Dice pooled over seeds
  std::vector<std::vector<EpochRecord>> histories;  // per seed
  double mean_dice = 0.0;             // across seeds
  double std_dice = 0.0;              // across seeds, n - 1
  // Welch test of patient_dice against the row differing only in the
  // integration flag; NaN when that row is absent or the test is degenerate.
  double t = 0.0;
  double p_value = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

using AblationProgress = std::function<void(const AblationConfig&, std::uint64_t seed, double dice)>;

// Trains every (cell, seed) pair on the same splits with `train` (its seed
// replaced by the run seed, which also seeds the model) and scores the best
// validation snapshot on the test split.
AblationTable run_ablation(const std::vector<AblationConfig>& grid, const DatasetSplits& data,
                           const ModelConfig& base, const TrainConfig& train,
                           const std::vector<std::uint64_t>& seeds,
                           const AblationProgress& progress = {});

// preset,selection,spatial_integration,n_seeds,mean_dice,std_dice,t,p_value,seed_dice
void write_ablation_csv(const AblationTable& table, std::ostream& out);
std::string render_ablation_table(const AblationTable& table);

}  // namespace fseg
