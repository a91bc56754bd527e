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

#include "fseg/training.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fseg/error.hpp"
#include "fseg/loss.hpp"
#include "fseg/metrics.hpp"

namespace fseg {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("train.beta1 must lie in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("train.beta2 must lie in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be non-negative");
  if (total_epochs == 0) throw ConfigError("train.total_epochs must be positive");
  if (warmup_epochs >= total_epochs) {
    throw ConfigError("train.warmup_epochs (" + std::to_string(warmup_epochs) +
                      ") must be smaller than train.total_epochs (" +
                      std::to_string(total_epochs) + ")");
  }
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
}

double lr_at(std::size_t epoch, std::size_t step_in_epoch, std::size_t steps_per_epoch,
             const TrainConfig& config) {
  const std::size_t step = epoch * steps_per_epoch + step_in_epoch;
  const std::size_t warmup = config.warmup_epochs * steps_per_epoch;
  const std::size_t total = config.total_epochs * steps_per_epoch;
  if (step < warmup) {
    return config.lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const std::size_t span = total - warmup - 1;
  if (span == 0 || step >= total - 1) return 0.0;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(span);
  return 0.5 * config.lr * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainResult train(SegmentationModel& model, const DatasetSplits& splits,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (splits.train.empty() || splits.val.empty()) {
    throw ConfigError("train: train and validation splits must be non-empty");
  }
  const bool encoder_frozen = std::all_of(
      model.encoder().parameters().begin(), model.encoder().parameters().end(),
      [](const Parameter& p) { return p.frozen; });
  std::unique_ptr<FeatureCache> train_cache, val_cache;
  if (encoder_frozen) {
    train_cache = std::make_unique<FeatureCache>(model.encoder(), splits.train);
    val_cache = std::make_unique<FeatureCache>(model.encoder(), splits.val);
  }

  AdamW optimizer(model.trainable(), config.optimizer());
  Rng rng(config.seed);
  std::vector<std::size_t> order(splits.train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps_per_epoch =
      (splits.train.size() + config.batch_size - 1) / config.batch_size;

  TrainResult result;
  bool have_best = false;
  for (std::size_t epoch = 0; epoch < config.total_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = step * config.batch_size;
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<const Sample*> batch;
      for (std::size_t i : idx) batch.push_back(&splits.train[i]);
      Variable images(stack_images(batch), false);
      const Tensor target = stack_masks(batch);

      optimizer.zero_grad();
      SegmentationModel::Output out =
          train_cache ? model.forward(images, train_cache->gather(idx))
                      : model.forward(images, model.encoder().forward(images));
      Variable loss = segmentation_loss(out.decoder.logits, target);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step));
      }
      loss.backward();
      lr = lr_at(epoch, step, steps_per_epoch, config);
      optimizer.step(lr);
      loss_sum += value;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    rec.lr = lr;
    {
      NoGradGuard no_grad;
      const Tensor w = model.fusion().weights().value();
      rec.fusion_weights.assign(w.data().begin(), w.data().end());
    }
    const auto cases = val_cache ? evaluate_cases(model, splits.val, *val_cache)
                                 : evaluate_cases(model, splits.val);
    rec.val_dice = aggregate(cases).mean_dice;
    if (!have_best || rec.val_dice > result.best_val_dice) {
      have_best = true;
      result.best_val_dice = rec.val_dice;
      result.best_epoch = epoch;
      result.best_weights = model.snapshot();
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  model.restore(result.best_weights);
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
  out << "epoch,train_loss,val_dice,lr";
  const std::size_t blocks = history.empty() ? 0 : history.front().fusion_weights.size();
  for (std::size_t i = 0; i < blocks; ++i) out << ",w_" << i;
  out << '\n';
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.val_dice) << ',' << fmt(r.lr);
    for (double w : r.fusion_weights) out << ',' << fmt(w);
    out << '\n';
  }
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  write_history_csv(history, os);
  return os.str();
}

}  // namespace fseg
