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

#include "fseg/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "fseg/error.hpp"
#include "fseg/metrics.hpp"
#include "fseg/stats.hpp"

namespace fseg {

std::string to_string(BlockSelection selection) {
  switch (selection) {
    case BlockSelection::last_4: return "last_4";
    case BlockSelection::fixed_list: return "fixed_list";
    case BlockSelection::learned_topk: return "learned_topk";
  }
  return "?";
}

BlockSelection parse_block_selection(const std::string& text) {
  if (text == "last_4") return BlockSelection::last_4;
  if (text == "fixed_list") return BlockSelection::fixed_list;
  if (text == "learned_topk") return BlockSelection::learned_topk;
  throw ConfigError("unknown block selection '" + text +
                    "' (expected last_4, fixed_list or learned_topk)");
}

ModelConfig AblationConfig::apply(const ModelConfig& base) const {
  ModelConfig m = base;
  m.encoder = EncoderConfig::preset(encoder_preset);
  m.encoder.image_height = base.encoder.image_height;
  m.encoder.image_width = base.encoder.image_width;
  m.encoder.in_channels = base.encoder.in_channels;
  const std::size_t n = m.encoder.num_blocks;
  m.fusion.k = 4;
  switch (selection) {
    case BlockSelection::last_4:
      m.fusion.mode = SelectionMode::fixed_list;
      m.fusion.fixed_blocks = {n - 4, n - 3, n - 2, n - 1};
      break;
    case BlockSelection::fixed_list:
      m.fusion.mode = SelectionMode::fixed_list;
      m.fusion.fixed_blocks = {0, 2, 4, 6};
      break;
    case BlockSelection::learned_topk:
      m.fusion.mode = SelectionMode::learned_topk;
      m.fusion.fixed_blocks.clear();
      break;
  }
  m.decoder.spatial_integration = spatial_integration;
  m.validate();
  return m;
}

std::string AblationConfig::label() const {
  return encoder_preset + "/" + to_string(selection) + "/" +
         (spatial_integration ? "integration" : "no_integration");
}

std::vector<AblationConfig> ablation_grid(const std::vector<std::string>& presets) {
  std::vector<AblationConfig> grid;
  for (const auto& preset : presets) {
    for (BlockSelection s : {BlockSelection::last_4, BlockSelection::fixed_list}) {
      for (bool integration : {true, false}) grid.push_back({s, integration, preset});
    }
  }
  return grid;
}

namespace {

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

AblationTable run_ablation(const std::vector<AblationConfig>& grid, const DatasetSplits& data,
                           const ModelConfig& base, const TrainConfig& train_config,
                           const std::vector<std::uint64_t>& seeds,
                           const AblationProgress& progress) {
  if (grid.empty() || seeds.empty()) throw ConfigError("ablation needs at least one cell and seed");
  AblationTable table;
  for (const AblationConfig& cell : grid) {
    AblationRow row;
    row.config = cell;
    row.seeds = seeds;
    const ModelConfig model_config = cell.apply(base);
    for (std::uint64_t seed : seeds) {
      SegmentationModel model(model_config, seed);
      TrainConfig tc = train_config;
      tc.seed = seed;
      row.histories.push_back(train(model, data, tc).history);
      const auto patients = per_patient(evaluate_cases(model, data.test));
      const MetricSummary summary = aggregate(patients);
      row.seed_dice.push_back(summary.mean_dice);
      for (const auto& c : patients) row.patient_dice.push_back(c.dice);
      if (progress) progress(cell, seed, summary.mean_dice);
    }
    row.mean_dice = std::accumulate(row.seed_dice.begin(), row.seed_dice.end(), 0.0) /
                    static_cast<double>(row.seed_dice.size());
    row.std_dice = sample_std(row.seed_dice, row.mean_dice);
    table.rows.push_back(std::move(row));
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (AblationRow& row : table.rows) {
    row.t = row.p_value = nan;
    for (const AblationRow& other : table.rows) {
      if (&other == &row || other.config.selection != row.config.selection ||
          other.config.encoder_preset != row.config.encoder_preset ||
          other.config.spatial_integration == row.config.spatial_integration) {
        continue;
      }
      try {
        const WelchResult w = row.config.spatial_integration
                                  ? welch_t_test(row.patient_dice, other.patient_dice)
                                  : welch_t_test(other.patient_dice, row.patient_dice);
        row.t = w.t;
        row.p_value = w.p;
      } catch (const Error&) {
      }
      break;
    }
  }
  return table;
}

void write_ablation_csv(const AblationTable& table, std::ostream& out) {
  out << "preset,selection,spatial_integration,n_seeds,mean_dice,std_dice,t,p_value,seed_dice\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const AblationRow& r : table.rows) {
    out << r.config.encoder_preset << ',' << to_string(r.config.selection) << ','
        << (r.config.spatial_integration ? "yes" : "no") << ',' << r.seed_dice.size() << ','
        << num(r.mean_dice) << ',' << num(r.std_dice) << ',' << num(r.t) << ','
        << num(r.p_value) << ',';
    for (std::size_t i = 0; i < r.seed_dice.size(); ++i) out << (i ? ";" : "") << num(r.seed_dice[i]);
    out << '\n';
  }
}

std::string render_ablation_table(const AblationTable& table) {
  std::string s;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %-14s %-12s %-18s %-10s\n", "Encoder", "Blocks",
                "Spatial Int.", "Dice (%)", "p (Welch)");
  s += buf;
  for (const AblationRow& r : table.rows) {
    const std::string blocks = r.config.selection == BlockSelection::last_4       ? "Last 4 blocks"
                               : r.config.selection == BlockSelection::fixed_list ? "7, 5, 3, 1"
                                                                                  : "Learned top-4";
    char dice[40];
    std::snprintf(dice, sizeof dice, "%.2f +/- %.2f", 100.0 * r.mean_dice, 100.0 * r.std_dice);
    char p[24];
    if (std::isnan(r.p_value)) std::snprintf(p, sizeof p, "n/a");
    else std::snprintf(p, sizeof p, "%.3g", r.p_value);
    std::snprintf(buf, sizeof buf, "%-8s %-14s %-12s %-18s %-10s\n", r.config.encoder_preset.c_str(),
                  blocks.c_str(), r.config.spatial_integration ? "Yes" : "No", dice, p);
    s += buf;
  }
  return s;
}

}  // namespace fseg
