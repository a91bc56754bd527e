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

#include "fseg/error.hpp"
#include "fseg/fusion.hpp"
#include "fseg/gradcheck.hpp"
#include "fseg/ops.hpp"
#include "test_util.hpp"

namespace fseg {
namespace {

using testing::randn;

std::vector<BlockFeatures> random_features(std::size_t n, std::uint64_t seed) {
  std::vector<BlockFeatures> f;
  for (std::size_t i = 0; i < n; ++i) f.push_back({i, Variable(randn({2, 3, 4}, seed + i))});
  return f;
}

Tensor weights_of(std::vector<double> w) {
  const std::size_t n = w.size();
  return Tensor({n}, std::move(w));
}

TEST(NormalizeWeights, PositiveSumToOneAndShiftInvariant) {
  const Tensor theta = randn({8}, 1, 3.0);
  const Tensor w = normalize_weights(Variable(theta)).value();
  double total = 0.0;
  for (double v : w.data()) {
    EXPECT_GT(v, 0.0);
    total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  Tensor shifted = theta;
  for (double& v : shifted.data()) v -= 41.5;
  EXPECT_LT(max_abs_diff(w, normalize_weights(Variable(shifted)).value()), 1e-12);
}

TEST(NormalizeWeights, AnalyticCases) {
  const Tensor uniform = normalize_weights(Variable(Tensor({5}, 0.3))).value();
  for (double v : uniform.data()) EXPECT_NEAR(v, 0.2, 1e-15);
  const Tensor w = normalize_weights(Variable(weights_of({std::log(3.0), 0.0}))).value();
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
}

TEST(NormalizeWeights, MonotoneInEachLogit) {
  for (std::uint64_t seed : {2, 3, 4}) {
    const Tensor theta = randn({6}, seed);
    const Tensor base = normalize_weights(Variable(theta)).value();
    for (std::size_t j = 0; j < 6; ++j) {
      Tensor bumped = theta;
      bumped[j] += 0.1;
      const Tensor w = normalize_weights(Variable(bumped)).value();
      for (std::size_t i = 0; i < 6; ++i) {
        if (i == j) EXPECT_GT(w[i], base[i]);
        else EXPECT_LT(w[i], base[i]);
      }
    }
  }
}

TEST(NormalizeWeights, JacobianMatchesFiniteDifferences) {
  Variable theta(randn({5}, 5), true);
  const Tensor probe = randn({5}, 6);
  const auto r = grad_check(
      [&] { return ops::sum(ops::mul(normalize_weights(theta), Variable(probe))); }, {theta});
  EXPECT_LE(r.max_rel_error, 1e-6);
}

TEST(FuseFeatures, OneHotSelectsBlockBitwise) {
  const auto f = random_features(4, 10);
  for (std::size_t j = 0; j < 4; ++j) {
    Tensor w({4}, 0.0);
    w[j] = 1.0;
    EXPECT_TRUE(fuse_features(f, Variable(w)).value().identical(f[j].tokens.value()));
  }
}

TEST(FuseFeatures, EqualInputsAreAFixedPoint) {
  const Tensor same = randn({2, 3, 4}, 20);
  const std::vector<BlockFeatures> f{{0, Variable(same)}, {1, Variable(same)}};
  const Tensor w = normalize_weights(Variable(randn({2}, 21))).value();
  EXPECT_LT(max_abs_diff(fuse_features(f, Variable(w)).value(), same), 1e-12);
}

TEST(FuseFeatures, MatchesLoopAccumulation) {
  const auto f = random_features(3, 30);
  const Tensor w = normalize_weights(Variable(randn({3}, 33))).value();
  const Tensor got = fuse_features(f, Variable(w)).value();
  for (std::size_t e = 0; e < got.numel(); ++e) {
    long double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += static_cast<long double>(w[i]) * f[i].tokens.value()[e];
    EXPECT_NEAR(got[e], static_cast<double>(s), 1e-12);
  }
}

TEST(FuseFeatures, RejectsMismatchedInputs) {
  auto f = random_features(3, 40);
  EXPECT_THROW(fuse_features(f, Variable(Tensor({2}, 0.5))), ShapeError);
  f[1].tokens = Variable(randn({2, 3, 5}, 41));
  EXPECT_THROW(fuse_features(f, Variable(Tensor({3}, 1.0 / 3))), ShapeError);
}

TEST(FuseFeatures, GradientsReachWeightsAndFeatures) {
  Variable theta(randn({3}, 50), true);
  std::vector<BlockFeatures> f;
  std::vector<Variable> params{theta};
  for (std::size_t i = 0; i < 3; ++i) {
    f.push_back({i, Variable(randn({1, 2, 3}, 51 + i), true)});
    params.push_back(f.back().tokens);
  }
  const Tensor probe = randn({1, 2, 3}, 60);
  auto loss = [&] {
    return ops::sum(ops::mul(fuse_features(f, normalize_weights(theta)), Variable(probe)));
  };
  EXPECT_LE(grad_check(loss, params).max_rel_error, 1e-6);
  loss().backward();
  double norm = 0.0;
  for (double g : theta.grad().data()) norm += g * g;
  EXPECT_GT(norm, 0.0);
}

TEST(SelectTopK, AnalyticCasesAndTies) {
  EXPECT_EQ(select_top_k(weights_of({0.1, 0.4, 0.2, 0.3}), 2), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(select_top_k(Tensor({4}, 0.25), 4), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(select_top_k(Tensor({5}, 0.2), 2), (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(select_top_k(weights_of({0.3, 0.1, 0.3, 0.3}), 2), (std::vector<std::size_t>{2, 3}));
  EXPECT_THROW(select_top_k(Tensor({4}, 0.25), 0), ConfigError);
  EXPECT_THROW(select_top_k(Tensor({4}, 0.25), 5), ConfigError);
}

TEST(SelectTopK, InvariantUnderLogitShift) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor theta = randn({8}, 100 + seed);
    Tensor shifted = theta;
    for (double& v : shifted.data()) v += 13.0;
    EXPECT_EQ(select_top_k(normalize_weights(Variable(theta)).value(), 4),
              select_top_k(normalize_weights(Variable(shifted)).value(), 4));
  }
}

TEST(Fusion, InitIsNearUniformAndSelectionFollowsMode) {
  Rng rng(7);
  FusionConfig cfg;
  cfg.k = 3;
  Fusion learned(cfg, 8, rng);
  EXPECT_EQ(learned.theta().name, "fusion.theta");
  EXPECT_FALSE(learned.theta().frozen);
  const Tensor w = learned.weights().value();
  for (double v : w.data()) EXPECT_NEAR(v, 0.125, 0.01);
  EXPECT_EQ(learned.select(w), select_top_k(w, 3));

  FusionConfig fixed;
  fixed.k = 3;
  fixed.mode = SelectionMode::fixed_list;
  fixed.fixed_blocks = {6, 0, 3};
  Fusion f(fixed, 8, rng);
  const auto before = f.select(f.weights().value());
  f.theta().var.mutable_value()[0] += 5.0;
  EXPECT_EQ(f.select(f.weights().value()), before);
  EXPECT_EQ(before, (std::vector<std::size_t>{0, 3, 6}));
}

TEST(FusionConfig, ValidatesAgainstBlockCount) {
  FusionConfig c;
  c.k = 9;
  EXPECT_THROW(c.validate(8), ConfigError);
  c.k = 2;
  c.mode = SelectionMode::fixed_list;
  c.fixed_blocks = {1, 8};
  EXPECT_THROW(c.validate(8), ConfigError);
  c.fixed_blocks = {1, 1};
  EXPECT_THROW(c.validate(8), ConfigError);
  c.fixed_blocks = {1};
  EXPECT_THROW(c.validate(8), ConfigError);
  EXPECT_EQ(parse_selection_mode(to_string(SelectionMode::fixed_list)), SelectionMode::fixed_list);
  EXPECT_THROW(parse_selection_mode("random"), ConfigError);
}

}  // namespace
}  // namespace fseg
