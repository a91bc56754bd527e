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

#include <string>

#include "fseg/pgm.hpp"

namespace fseg {

// Side-by-side triptych (image | gt overlay | prediction overlay) with one
// white separator column between panels, so width is 3W + 2. Mask pixels
// are brightened to 128 + v/2; pixels outside the mask keep the image value.
// `image` is [C, H, W] (first channel shown), masks are [1, H, W].
GrayImage render_overlay(const Tensor& image, const Tensor& gt_mask, const Tensor& pred_mask);

// Writes render_overlay as PGM and returns the Dice of pred against gt.
double emit_overlay(const Tensor& image, const Tensor& gt_mask, const Tensor& pred_mask,
                    const std::string& path);

}  // namespace fseg
