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

#include "fseg/metrics.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "fseg/error.hpp"

namespace fseg {

namespace {

struct Counts {
  double inter = 0, pred = 0, gt = 0;
};

Counts count(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("mask shape mismatch " + shape_str(pred.shape()) + " vs " +
                     shape_str(gt.shape()));
  }
  Counts c;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double p = pred[i], g = gt[i];
    if ((p != 0.0 && p != 1.0) || (g != 0.0 && g != 1.0)) {
      throw ContractError("metrics need binary masks");
    }
    c.inter += p * g;
    c.pred += p;
    c.gt += g;
  }
  return c;
}

}  // namespace

double dice(const Tensor& pred, const Tensor& gt) {
  const Counts c = count(pred, gt);
  if (c.pred + c.gt == 0) return 1.0;
  return 2.0 * c.inter / (c.pred + c.gt);
}

double iou(const Tensor& pred, const Tensor& gt) {
  const Counts c = count(pred, gt);
  const double uni = c.pred + c.gt - c.inter;
  if (uni == 0) return 1.0;
  return c.inter / uni;
}

Tensor threshold_logits(const Tensor& logits) {
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < logits.numel(); ++i) out[i] = logits[i] > 0.0 ? 1.0 : 0.0;
  return out;
}

std::vector<CaseMetrics> per_patient(const std::vector<CaseMetrics>& cases) {
  std::vector<CaseMetrics> out;
  std::map<std::string, std::size_t> slot;
  std::vector<std::size_t> counts;
  for (const CaseMetrics& c : cases) {
    auto [it, fresh] = slot.emplace(c.patient_id, out.size());
    if (fresh) {
      out.push_back({c.patient_id, 0.0, 0.0});
      counts.push_back(0);
    }
    out[it->second].dice += c.dice;
    out[it->second].iou += c.iou;
    ++counts[it->second];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].dice /= static_cast<double>(counts[i]);
    out[i].iou /= static_cast<double>(counts[i]);
  }
  return out;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

MetricSummary aggregate(const std::vector<CaseMetrics>& cases) {
  if (cases.empty()) throw ContractError("aggregate: no cases");
  const std::vector<CaseMetrics> patients = per_patient(cases);
  std::vector<double> d, j;
  for (const CaseMetrics& c : patients) {
    d.push_back(c.dice);
    j.push_back(c.iou);
  }
  MetricSummary s;
  s.count = patients.size();
  std::tie(s.mean_dice, s.std_dice) = mean_std(d);
  std::tie(s.mean_iou, s.std_iou) = mean_std(j);
  s.std_defined = patients.size() >= 2;
  return s;
}

FeatureCache::FeatureCache(const Encoder& encoder, const std::vector<Sample>& samples,
                           std::size_t batch_size) {
  NoGradGuard no_grad;
  features_.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const Sample*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    const std::vector<BlockFeatures> out = encoder.forward(stack_images(batch));
    const std::size_t n = out.front().tokens.dim(1);
    const std::size_t d = out.front().tokens.dim(2);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::vector<Tensor> per_block;
      for (const BlockFeatures& f : out) {
        const double* src = f.tokens.value().raw() + i * n * d;
        per_block.emplace_back(Shape{n, d}, std::vector<double>(src, src + n * d));
      }
      features_.push_back(std::move(per_block));
    }
  }
}

std::vector<BlockFeatures> FeatureCache::gather(const std::vector<std::size_t>& indices) const {
  const std::size_t blocks = features_.front().size();
  const Shape& s = features_.front().front().shape();
  std::vector<BlockFeatures> out;
  for (std::size_t b = 0; b < blocks; ++b) {
    Tensor t({indices.size(), s[0], s[1]});
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const Tensor& src = features_.at(indices[i])[b];
      std::copy(src.raw(), src.raw() + src.numel(), t.raw() + i * src.numel());
    }
    out.push_back({b, Variable(std::move(t), false)});
  }
  return out;
}

namespace {

template <typename Forward>
std::vector<CaseMetrics> run_cases(const std::vector<Sample>& samples, std::size_t batch_size,
                                   Forward forward) {
  NoGradGuard no_grad;
  std::vector<CaseMetrics> out;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const Sample*> batch;
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(&samples[i]);
      idx.push_back(i);
    }
    const Tensor logits = forward(batch, idx);
    const Tensor pred = threshold_logits(logits);
    const std::size_t per = pred.numel() / batch.size();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Tensor& gt = batch[i]->mask;
      Tensor p(gt.shape(), std::vector<double>(pred.raw() + i * per, pred.raw() + (i + 1) * per));
      out.push_back({batch[i]->patient_id, dice(p, gt), iou(p, gt)});
    }
  }
  return out;
}

}  // namespace

std::vector<CaseMetrics> evaluate_cases(const SegmentationModel& model,
                                        const std::vector<Sample>& samples,
                                        std::size_t batch_size) {
  return run_cases(samples, batch_size, [&](const auto& batch, const auto&) {
    return model.forward(stack_images(batch)).decoder.logits.value();
  });
}

std::vector<CaseMetrics> evaluate_cases(const SegmentationModel& model,
                                        const std::vector<Sample>& samples,
                                        const FeatureCache& cache, std::size_t batch_size) {
  return run_cases(samples, batch_size, [&](const auto& batch, const auto& idx) {
    Variable images(stack_images(batch), false);
    return model.forward(images, cache.gather(idx)).decoder.logits.value();
  });
}

}  // namespace fseg
