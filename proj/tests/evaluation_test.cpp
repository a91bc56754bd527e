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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fseg/ablation.hpp"
#include "fseg/error.hpp"
#include "fseg/metrics.hpp"
#include "fseg/stats.hpp"
#include "test_util.hpp"
#include "welch_oracle.hpp"

namespace fseg {
namespace {

Tensor random_mask(Rng& rng, std::size_t h, std::size_t w, double p) {
  std::bernoulli_distribution coin(p);
  Tensor m({1, h, w});
  for (double& v : m.data()) v = coin(rng) ? 1.0 : 0.0;
  return m;
}

// Brute-force set counting over pixel indices.
std::pair<double, double> set_metrics(const Tensor& a, const Tensor& b) {
  std::size_t inter = 0, uni = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const bool x = a[i] > 0.5, y = b[i] > 0.5;
    inter += x && y;
    uni += x || y;
    na += x;
    nb += y;
  }
  if (uni == 0) return {1.0, 1.0};
  return {2.0 * inter / static_cast<double>(na + nb), inter / static_cast<double>(uni)};
}

TEST(Metrics, AnalyticCases) {
  Tensor p({1, 2, 4}), g({1, 2, 4});
  for (std::size_t i : {0, 1, 2, 3}) p[i] = 1.0;
  for (std::size_t i : {2, 3, 4, 5}) g[i] = 1.0;
  EXPECT_DOUBLE_EQ(dice(p, g), 0.5);
  EXPECT_DOUBLE_EQ(iou(p, g), 2.0 / 6.0);
  EXPECT_EQ(dice(p, p), 1.0);
  EXPECT_EQ(iou(p, p), 1.0);
  Tensor q({1, 2, 4});
  q[7] = 1.0;
  EXPECT_EQ(dice(p, q), 0.0);
  const Tensor empty({1, 2, 4});
  EXPECT_EQ(dice(empty, empty), 1.0);
  EXPECT_EQ(iou(empty, empty), 1.0);
  EXPECT_THROW(dice(p, Tensor({1, 4, 2})), ShapeError);
  p[0] = 0.3;
  EXPECT_THROW(iou(p, g), ContractError);
}

TEST(Metrics, IdentitiesOverRandomPairs) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double density = 0.05 + 0.9 * static_cast<double>(i % 10) / 10.0;
    const Tensor a = random_mask(rng, 7, 9, density), b = random_mask(rng, 7, 9, density / 2);
    const double d = dice(a, b), j = iou(a, b);
    const auto [bd, bj] = set_metrics(a, b);
    EXPECT_NEAR(d, bd, 1e-15);
    EXPECT_NEAR(j, bj, 1e-15);
    EXPECT_NEAR(j, d / (2.0 - d), 1e-12);
    EXPECT_LE(j, d);
    EXPECT_EQ(d, dice(b, a));
    EXPECT_EQ(j, iou(b, a));
  }
}

TEST(Metrics, InvariantUnderJointPermutation) {
  Rng rng(2);
  const Tensor a = random_mask(rng, 6, 6, 0.4), b = random_mask(rng, 6, 6, 0.4);
  std::vector<std::size_t> perm(36);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor pa({1, 6, 6}), pb({1, 6, 6});
  for (std::size_t i = 0; i < 36; ++i) {
    pa[i] = a[perm[i]];
    pb[i] = b[perm[i]];
  }
  EXPECT_EQ(dice(a, b), dice(pa, pb));
  EXPECT_EQ(iou(a, b), iou(pa, pb));
}

TEST(Metrics, ThresholdAtHalfProbability) {
  const Tensor logits({4}, std::vector<double>{-1.0, 0.0, 1e-9, 3.0});
  const Tensor m = threshold_logits(logits);
  EXPECT_EQ(m[0], 0.0);
  EXPECT_EQ(m[1], 0.0);
  EXPECT_EQ(m[2], 1.0);
  EXPECT_EQ(m[3], 1.0);
}

TEST(Aggregate, TwoPointAndSingleCase) {
  const MetricSummary s = aggregate({{"A", 0.8, 0.8 / 1.2}, {"B", 1.0, 1.0}});
  EXPECT_NEAR(s.mean_dice, 0.9, 1e-15);
  EXPECT_NEAR(s.std_dice, std::sqrt(0.02), 1e-15);
  EXPECT_TRUE(s.std_defined);
  const MetricSummary one = aggregate({{"A", 0.7, 0.5}});
  EXPECT_EQ(one.std_dice, 0.0);
  EXPECT_FALSE(one.std_defined);
  EXPECT_THROW(aggregate({}), ContractError);
}

TEST(Aggregate, PatientLevelBeforeAveraging) {
  const MetricSummary s = aggregate({{"A", 1.0, 1.0}, {"A", 0.0, 0.0}, {"A", 0.5, 0.5}, {"B", 0.9, 0.9}});
  EXPECT_EQ(s.count, 2u);
  EXPECT_NEAR(s.mean_dice, 0.7, 1e-15);
}

TEST(Aggregate, MatchesWelfordAndIsPermutationInvariant) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  std::vector<CaseMetrics> cases;
  for (int i = 0; i < 10; ++i) {
    const double d = u(rng);
    cases.push_back({"P" + std::to_string(i), d, d / (2 - d)});
  }
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const double delta = cases[i].dice - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (cases[i].dice - mean);
  }
  const MetricSummary s = aggregate(cases);
  EXPECT_NEAR(s.mean_dice, mean, 1e-12);
  EXPECT_NEAR(s.std_dice, std::sqrt(m2 / 9.0), 1e-12);
  std::shuffle(cases.begin(), cases.end(), rng);
  const MetricSummary t = aggregate(cases);
  EXPECT_NEAR(t.mean_dice, s.mean_dice, 1e-15);
  EXPECT_NEAR(t.std_dice, s.std_dice, 1e-15);
}

TEST(Welch, MatchesQuadratureOracle) {
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs{
      {{0.91, 0.88, 0.93, 0.90, 0.87, 0.92, 0.89, 0.94}, {0.86, 0.84, 0.90, 0.85, 0.83, 0.88, 0.87, 0.82}},
      {{1.2, 3.4, 2.2, 5.1, 4.4, 2.9, 3.3, 4.0}, {2.0, 2.1, 1.9, 2.2, 2.05, 1.95, 2.15, 2.0}},
      {{0.5, 0.7, 0.6, 0.65, 0.55}, {0.52, 0.61, 0.75, 0.58, 0.66, 0.71, 0.49, 0.69, 0.63}},
  };
  for (const auto& [a, b] : pairs) {
    const WelchResult r = welch_t_test(a, b);
    const testing::WelchOracle o = testing::welch_oracle(a, b);
    EXPECT_NEAR(r.t, o.t, 1e-9);
    EXPECT_NEAR(r.df, o.df, 1e-9);
    EXPECT_NEAR(r.p, o.p, 1e-9);
    const WelchResult s = welch_t_test(b, a);
    EXPECT_EQ(s.t, -r.t);
    EXPECT_EQ(s.p, r.p);
  }
}

TEST(Welch, NullAndDegenerateCases) {
  const std::vector<double> a{0.2, 0.4, 0.3, 0.9};
  const WelchResult r = welch_t_test(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
  EXPECT_THROW(welch_t_test({1.0, 1.0, 1.0}, {2.0, 2.0, 2.0}), NumericError);
  EXPECT_THROW(welch_t_test({1.0}, {2.0, 3.0}), ContractError);
}

TEST(Ablation, GridShapeAndSelectionMapping) {
  const auto grid = ablation_grid({"base", "large"});
  EXPECT_EQ(grid.size(), 8u);
  ModelConfig base;
  const ModelConfig last = AblationConfig{BlockSelection::last_4, true, "base"}.apply(base);
  EXPECT_EQ(last.fusion.mode, SelectionMode::fixed_list);
  EXPECT_EQ(last.fusion.fixed_blocks, (std::vector<std::size_t>{4, 5, 6, 7}));
  const ModelConfig fixed = AblationConfig{BlockSelection::fixed_list, false, "large"}.apply(base);
  EXPECT_EQ(fixed.fusion.fixed_blocks, (std::vector<std::size_t>{0, 2, 4, 6}));
  EXPECT_FALSE(fixed.decoder.spatial_integration);
  EXPECT_EQ(fixed.encoder.num_blocks, 12u);
  EXPECT_EQ(parse_block_selection("learned_topk"), BlockSelection::learned_topk);
  EXPECT_THROW(parse_block_selection("all"), ConfigError);
}

TEST(Ablation, IdenticalCellsGiveIdenticalResults) {
  // Cells install the base encoder preset (patch 8, 8 blocks); only the
  // image geometry and the decoder come from `base`.
  ModelConfig base = testing::tiny_model_config();
  base.encoder.image_height = base.encoder.image_width = 32;
  base.decoder.stage_channels = {4, 4, 4, 4};
  const auto splits = split_patients(generate_synthetic(10, 1, 32, 32, 1), {0.6, 0.2, 0.2, 0});
  TrainConfig tc;
  tc.lr = 2e-3;
  tc.warmup_epochs = 0;
  tc.total_epochs = 1;
  tc.batch_size = 4;
  const AblationConfig cell{BlockSelection::last_4, true, "base"};
  const AblationTable t = run_ablation({cell, cell, {BlockSelection::last_4, false, "base"}}, splits,
                                       base, tc, {0, 1});
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0].seed_dice, t.rows[1].seed_dice);
  EXPECT_EQ(t.rows[0].patient_dice, t.rows[1].patient_dice);
  EXPECT_EQ(t.rows[0].histories.size(), 2u);
  std::ostringstream csv;
  write_ablation_csv(t, csv);
  EXPECT_EQ(csv.str().rfind("preset,selection,spatial_integration,n_seeds,mean_dice", 0), 0u);
  EXPECT_NE(render_ablation_table(t).find("Last 4 blocks"), std::string::npos);
}

}  // namespace
}  // namespace fseg
