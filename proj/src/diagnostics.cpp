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

#include "fseg/diagnostics.hpp"

#include <cstdio>
#include <functional>

#include "fseg/decoder.hpp"
#include "fseg/fusion.hpp"
#include "fseg/gradcheck.hpp"
#include "fseg/loss.hpp"
#include "fseg/model.hpp"
#include "fseg/ops.hpp"

namespace fseg {

namespace {

using ops::mul;
using ops::sum;

struct Suite {
  Rng rng;
  std::vector<OpGradCheck> results;

  explicit Suite(std::uint64_t seed) : rng(seed) {}

  Variable param(const Shape& shape, double stddev = 1.0) {
    return Variable(normal_tensor(shape, stddev, rng), true);
  }

  Tensor binary(const Shape& shape) {
    Tensor t = Tensor::zeros(shape);
    std::bernoulli_distribution coin(0.4);
    for (double& v : t.data()) v = coin(rng) ? 1.0 : 0.0;
    return t;
  }

  // Random linear functional of the op output, so every output coordinate
  // contributes a distinct weight.
  std::function<Variable()> probe(std::function<Variable()> op) {
    const Shape shape = op().shape();
    Variable weights(normal_tensor(shape, 1.0, rng));
    return [op, weights] { return sum(mul(op(), weights)); };
  }

  void check(const std::string& name, std::function<Variable()> loss,
             const std::vector<Variable>& params) {
    std::size_t coords = 0;
    for (const auto& p : params) coords += p.value().numel();
    const GradCheckResult r = grad_check(loss, params);
    results.push_back({name, coords, r.max_rel_error});
  }

  void check_op(const std::string& name, std::function<Variable()> op,
                const std::vector<Variable>& params) {
    check(name, probe(std::move(op)), params);
  }
};

}  // namespace

std::vector<OpGradCheck> run_gradcheck_suite(std::uint64_t seed) {
  Suite s(seed);

  {
    Variable a = s.param({2, 3, 4}), b = s.param({2, 4, 5}), w = s.param({4, 3});
    s.check_op("matmul", [=] { return ops::matmul(a, b); }, {a, b});
    s.check_op("matmul_shared", [=] { return ops::matmul(a, w); }, {a, w});
  }
  {
    Variable x = s.param({2, 3, 4}), w = s.param({4, 5}), b = s.param({5});
    s.check_op("linear", [=] { return ops::linear(x, w, b); }, {x, w, b});
  }
  {
    Variable x = s.param({2, 3, 5, 6}), k = s.param({4, 3, 3, 3}), b = s.param({4});
    s.check_op("conv2d", [=] { return ops::conv2d(x, k, b, {1, 1}); }, {x, k, b});
    Variable x2 = s.param({1, 3, 5, 7});
    s.check_op("conv2d_stride2", [=] { return ops::conv2d(x2, k, b, {2, 1}); }, {x2, k, b});
    Variable k1 = s.param({2, 3, 1, 1});
    s.check_op("conv2d_1x1", [=] { return ops::conv2d(x, k1, Variable()); }, {x, k1});
  }
  {
    Variable x = s.param({2, 3, 3, 4}), k = s.param({3, 2, 2, 2}), b = s.param({2});
    s.check_op("upsample2x", [=] { return ops::upsample2x(x, k, b); }, {x, k, b});
  }
  {
    Variable x = s.param({2, 2, 5, 7});
    s.check_op("resize_up", [=] { return ops::resize_bilinear(x, 8, 11); }, {x});
    s.check_op("resize_down", [=] { return ops::resize_bilinear(x, 3, 2); }, {x});
  }
  {
    Variable x = s.param({3, 6});
    s.check_op("softmax", [=] { return ops::softmax(x); }, {x});
  }
  {
    Variable x = s.param({2, 3, 6}), g = s.param({6}), b = s.param({6});
    s.check_op("layer_norm", [=] { return ops::layer_norm(x, g, b); }, {x, g, b});
  }
  {
    Variable q = s.param({2, 5, 8}), k = s.param({2, 5, 8}), v = s.param({2, 5, 8});
    s.check_op("attention", [=] { return ops::attention(q, k, v, 2); }, {q, k, v});
  }
  {
    Variable x = s.param({3, 7}, 2.0);
    s.check_op("gelu", [=] { return ops::gelu(x); }, {x});
    s.check_op("sigmoid", [=] { return ops::sigmoid(x); }, {x});
  }
  {
    Variable a = s.param({2, 2, 3, 3}), b = s.param({2, 1, 3, 3}), c = s.param({2, 3, 3, 3});
    s.check_op("concat", [=] { return ops::concat_channels({a, b, c}); }, {a, b, c});
  }
  {
    Variable theta = s.param({4}, 0.5);
    std::vector<BlockFeatures> features;
    std::vector<Variable> params{theta};
    for (std::size_t i = 0; i < 4; ++i) {
      features.push_back({i, s.param({2, 3, 5})});
      params.push_back(features.back().tokens);
    }
    s.check_op("fusion_weights",
               [=] { return fuse_features(features, normalize_weights(theta)); }, params);
  }
  {
    Variable img = s.param({2, 1, 6, 6}), w = s.param({3, 1, 3, 3}), b = s.param({3});
    s.check_op("image_adapter", [=] { return image_adapter(img, w, b); }, {img, w, b});
  }
  {
    Variable map = s.param({2, 4, 3, 3}), w = s.param({2, 4, 1, 1}), b = s.param({2});
    s.check_op("skip_project", [=] { return skip_project(map, w, b, 5, 5); }, {map, w, b});
  }
  {
    Variable prev = s.param({1, 3, 4, 4}), skip = s.param({1, 2, 4, 4}), img = s.param({1, 2, 4, 4});
    StageWeights sw{s.param({3, 7, 3, 3}, 0.3), s.param({3}), s.param({3, 2, 2, 2}), s.param({2})};
    s.check_op("decoder_stage", [=] { return decoder_stage(prev, skip, img, sw); },
               {prev, skip, img, sw.conv_w, sw.conv_b, sw.up_w, sw.up_b});
  }
  {
    Variable logits = s.param({2, 1, 4, 4}, 2.0);
    const Tensor target = s.binary({2, 1, 4, 4});
    s.check("bce_loss", [=] { return bce_with_logits(logits, target); }, {logits});
    s.check("dice_loss", [=] { return soft_dice_loss(logits, target); }, {logits});
    s.check("segmentation_loss", [=] { return segmentation_loss(logits, target); }, {logits});
  }
  {
    ModelConfig mc;
    mc.encoder.patch_size = 4;
    mc.encoder.embed_dim = 8;
    mc.encoder.num_blocks = 2;
    mc.encoder.num_heads = 2;
    mc.encoder.mlp_ratio = 2;
    mc.encoder.image_height = mc.encoder.image_width = 8;
    mc.fusion.k = 2;
    mc.decoder.stage_channels = {4, 2};
    mc.decoder.image_adapter_channels = 2;
    auto model = std::make_shared<SegmentationModel>(mc, seed);
    std::vector<Variable> params;
    for (Parameter* p : model->parameters()) {
      p->set_frozen(false);
      params.push_back(p->var);
    }
    Tensor images = normal_tensor({2, 1, 8, 8}, 1.0, s.rng);
    const Tensor target = s.binary({2, 1, 8, 8});
    s.check("end_to_end",
            [=] { return segmentation_loss(model->forward(images).decoder.logits, target); },
            params);
  }
  return s.results;
}

std::string render_gradcheck_table(const std::vector<OpGradCheck>& checks) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-20s %8s %14s %6s\n", "op", "coords", "max_rel_err", "ok");
  out += line;
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-20s %8zu %14.3e %6s\n", c.name.c_str(), c.coordinates,
                  c.max_rel_error, c.max_rel_error <= kGradCheckTolerance ? "yes" : "NO");
    out += line;
  }
  return out;
}

bool gradcheck_passed(const std::vector<OpGradCheck>& checks, double tolerance) {
  for (const auto& c : checks) {
    if (!(c.max_rel_error <= tolerance)) return false;
  }
  return !checks.empty();
}

}  // namespace fseg
