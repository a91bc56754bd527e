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

#include "fseg/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "fseg/error.hpp"
#include "fseg/parameter.hpp"

namespace fseg {

void SplitSpec::validate() const {
  if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0) {
    throw ConfigError("split fractions must be non-negative");
  }
  const double total = train_fraction + val_fraction + test_fraction;
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions sum to " + std::to_string(total) + ", expected 1");
  }
}

namespace {

constexpr double kPi = std::numbers::pi;

struct BlobParams {
  double cx, cy, radius, aspect, angle;
  double amp[3], phase[3];
  double lobe_angle, lobe_size, drift_phase;
  double fg, bg, grad_angle;
  double tex_fx, tex_fy, tex_phase;
  double bias_x, bias_y;
};

BlobParams draw_patient(Rng& rng, std::size_t h, std::size_t w) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const double side = static_cast<double>(std::min(h, w));
  BlobParams p{};
  p.cx = u(0.38, 0.62) * static_cast<double>(w);
  p.cy = u(0.38, 0.62) * static_cast<double>(h);
  p.radius = u(0.16, 0.24) * side;
  p.aspect = u(0.75, 1.0);
  p.angle = u(0.0, kPi);
  for (int k = 0; k < 3; ++k) {
    p.amp[k] = u(0.0, 0.08);
    p.phase[k] = u(0.0, 2 * kPi);
  }
  p.lobe_angle = u(0.0, 2 * kPi);
  p.lobe_size = u(0.35, 0.5);
  p.drift_phase = u(0.0, 2 * kPi);
  p.fg = u(0.65, 0.85);
  p.bg = u(0.15, 0.30);
  p.grad_angle = u(0.0, 2 * kPi);
  p.tex_fx = u(1.0, 3.0);
  p.tex_fy = u(1.0, 3.0);
  p.tex_phase = u(0.0, 2 * kPi);
  p.bias_x = u(-0.15, 0.15);
  p.bias_y = u(-0.15, 0.15);
  return p;
}

}  // namespace

std::vector<Sample> generate_synthetic(std::size_t num_patients, std::size_t slices_per_patient,
                                       std::size_t height, std::size_t width, std::uint64_t seed,
                                       std::size_t channels) {
  if (num_patients == 0 || slices_per_patient == 0 || height < 8 || width < 8 || channels == 0) {
    throw ConfigError("generate_synthetic: degenerate size (patients " +
                      std::to_string(num_patients) + ", slices " +
                      std::to_string(slices_per_patient) + ", image " + std::to_string(height) +
                      "x" + std::to_string(width) + ")");
  }
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<Sample> out;
  out.reserve(num_patients * slices_per_patient);
  const double hh = static_cast<double>(height);
  const double ww = static_cast<double>(width);
  for (std::size_t pi = 0; pi < num_patients; ++pi) {
    const BlobParams p = draw_patient(rng, height, width);
    char id[32];
    std::snprintf(id, sizeof id, "P%03zu", pi);
    for (std::size_t z = 0; z < slices_per_patient; ++z) {
      const double t = (static_cast<double>(z) + 0.5) / static_cast<double>(slices_per_patient);
      const double s = 0.7 + 0.3 * std::sin(kPi * t);
      const double cx = p.cx + 1.5 * std::sin(2 * kPi * t + p.drift_phase);
      const double cy = p.cy + 1.5 * std::cos(2 * kPi * t + p.drift_phase);
      const double a = p.radius * s;
      const double b = a * p.aspect;
      const double ca = std::cos(p.angle), sa = std::sin(p.angle);
      // Lobe sits on the body boundary so the region stays connected.
      const double lobe_r = p.lobe_size * a;
      const double lobe_dist = 0.9 * std::hypot(a * std::cos(p.lobe_angle - p.angle),
                                                b * std::sin(p.lobe_angle - p.angle));
      const double lx = cx + lobe_dist * std::cos(p.lobe_angle);
      const double ly = cy + lobe_dist * std::sin(p.lobe_angle);
      const double cl = std::cos(p.lobe_angle), sl = std::sin(p.lobe_angle);
      const double gx = std::cos(p.grad_angle), gy = std::sin(p.grad_angle);

      Sample sample;
      sample.patient_id = id;
      sample.mask = Tensor({1, height, width});
      Tensor plane({height, width});
      for (std::size_t i = 0; i < height; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
          const double x = static_cast<double>(j) + 0.5;
          const double y = static_cast<double>(i) + 0.5;
          const double dx = x - cx, dy = y - cy;
          const double u = (dx * ca + dy * sa) / a;
          const double v = (-dx * sa + dy * ca) / b;
          const double th = std::atan2(v, u);
          double edge = 1.0;
          for (int k = 0; k < 3; ++k) edge += p.amp[k] * std::cos((k + 2) * th + p.phase[k] + t);
          bool inside = std::hypot(u, v) <= edge;
          if (!inside) {
            const double ex = x - lx, ey = y - ly;
            const double lu = (ex * cl + ey * sl) / lobe_r;
            const double lv = (-ex * sl + ey * cl) / (0.7 * lobe_r);
            inside = lu * lu + lv * lv <= 1.0;
          }
          sample.mask[i * width + j] = inside ? 1.0 : 0.0;

          double value;
          if (inside) {
            value = p.fg + 0.08 * (gx * dx + gy * dy) / (a + 1e-9);
          } else {
            value = p.bg + 0.05 * std::sin(2 * kPi * (p.tex_fx * x / ww + p.tex_fy * y / hh) +
                                           p.tex_phase) +
                    0.03 * std::sin(2 * kPi * 5.0 * x / ww + 2.0 * p.tex_phase);
          }
          const double bias = 1.0 + p.bias_x * (2.0 * x / ww - 1.0) + p.bias_y * (2.0 * y / hh - 1.0);
          value = value * bias + noise(rng);
          plane[i * width + j] = std::clamp(value, 0.0, 1.0);
        }
      }
      sample.image = Tensor({channels, height, width});
      for (std::size_t c = 0; c < channels; ++c) {
        std::copy(plane.raw(), plane.raw() + plane.numel(), sample.image.raw() + c * plane.numel());
      }
      out.push_back(std::move(sample));
    }
  }
  return out;
}

std::vector<std::string> patient_ids(const std::vector<Sample>& samples) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const Sample& s : samples) {
    if (seen.insert(s.patient_id).second) ids.push_back(s.patient_id);
  }
  return ids;
}

DatasetSplits split_patients(const std::vector<Sample>& samples, const SplitSpec& split) {
  split.validate();
  std::vector<std::string> ids = patient_ids(samples);
  if (ids.size() < 3) {
    throw ConfigError("split_patients: need at least 3 patients, got " +
                      std::to_string(ids.size()));
  }
  Rng rng(split.seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const double n = static_cast<double>(ids.size());
  const auto n_val = static_cast<std::size_t>(std::floor(n * split.val_fraction + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(n * split.test_fraction + 1e-9));
  if (n_val + n_test >= ids.size()) throw ConfigError("split_patients: train split is empty");
  if (n_val == 0) throw ConfigError("split_patients: validation split is empty");
  if (n_test == 0) throw ConfigError("split_patients: test split is empty");
  const std::size_t n_train = ids.size() - n_val - n_test;
  std::set<std::string> train(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::set<std::string> val(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                            ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  DatasetSplits out;
  for (const Sample& s : samples) {
    if (train.count(s.patient_id)) {
      out.train.push_back(s);
    } else if (val.count(s.patient_id)) {
      out.val.push_back(s);
    } else {
      out.test.push_back(s);
    }
  }
  return out;
}

namespace {

Tensor stack(const std::vector<const Sample*>& batch, bool masks) {
  if (batch.empty()) throw ShapeError("stack: empty batch");
  const Tensor& first = masks ? batch.front()->mask : batch.front()->image;
  Shape shape{batch.size()};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor out(shape);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor& t = masks ? batch[i]->mask : batch[i]->image;
    if (t.shape() != first.shape()) throw ShapeError("stack: samples differ in shape");
    std::copy(t.raw(), t.raw() + t.numel(), out.raw() + i * t.numel());
  }
  return out;
}

}  // namespace

Tensor stack_images(const std::vector<const Sample*>& batch) { return stack(batch, false); }
Tensor stack_masks(const std::vector<const Sample*>& batch) { return stack(batch, true); }

double foreground_fraction(const Tensor& mask) {
  double fg = 0.0;
  for (double v : mask.data()) fg += v > 0.5 ? 1.0 : 0.0;
  return fg / static_cast<double>(mask.numel());
}

std::size_t count_components(const Tensor& mask) {
  const std::size_t h = mask.dim(mask.rank() - 2);
  const std::size_t w = mask.dim(mask.rank() - 1);
  std::vector<char> seen(h * w, 0);
  std::vector<std::size_t> stack;
  std::size_t components = 0;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (seen[start] || mask[start] < 0.5) continue;
    ++components;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      const std::size_t i = idx / w, j = idx % w;
      const std::size_t nbr[4] = {i > 0 ? idx - w : idx, i + 1 < h ? idx + w : idx,
                                  j > 0 ? idx - 1 : idx, j + 1 < w ? idx + 1 : idx};
      for (std::size_t n : nbr) {
        if (!seen[n] && mask[n] >= 0.5) {
          seen[n] = 1;
          stack.push_back(n);
        }
      }
    }
  }
  return components;
}

}  // namespace fseg
