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

#include "fseg/overlay.hpp"

#include "fseg/error.hpp"
#include "fseg/metrics.hpp"

namespace fseg {

GrayImage render_overlay(const Tensor& image, const Tensor& gt_mask, const Tensor& pred_mask) {
  if (image.rank() != 3 || gt_mask.rank() != 3 || pred_mask.rank() != 3) {
    throw ShapeError("overlay expects [C, H, W] image and [1, H, W] masks");
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (gt_mask.shape() != Shape{1, h, w} || pred_mask.shape() != Shape{1, h, w}) {
    throw ShapeError("overlay masks " + shape_str(gt_mask.shape()) + " and " +
                     shape_str(pred_mask.shape()) + " do not match image " +
                     shape_str(image.shape()));
  }
  const Tensor plane({h, w}, std::vector<double>(image.raw(), image.raw() + h * w));
  const GrayImage base = to_gray(plane);

  GrayImage out;
  out.width = 3 * w + 2;
  out.height = h;
  out.pixels.assign(out.width * h, 255);
  const Tensor* masks[3] = {nullptr, &gt_mask, &pred_mask};
  for (std::size_t panel = 0; panel < 3; ++panel) {
    const std::size_t x0 = panel * (w + 1);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        std::uint8_t v = base.pixels[y * w + x];
        if (masks[panel] && (*masks[panel])[y * w + x] > 0.5) {
          v = static_cast<std::uint8_t>(128 + v / 2);
        }
        out.pixels[y * out.width + x0 + x] = v;
      }
    }
  }
  return out;
}

double emit_overlay(const Tensor& image, const Tensor& gt_mask, const Tensor& pred_mask,
                    const std::string& path) {
  write_pgm(render_overlay(image, gt_mask, pred_mask), path);
  return dice(pred_mask, gt_mask);
}

}  // namespace fseg
