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

#include "fseg/autograd.hpp"

namespace fseg {

// Mean binary cross-entropy on logits, evaluated in the overflow-free form
// max(x, 0) - x*t + log(1 + exp(-|x|)). Target must be binary.
Variable bce_with_logits(const Variable& logits, const Tensor& target);

// Mean over the batch of 1 - (2*sum(p*t) + smooth) / (sum(p) + sum(t) + smooth)
// with p = sigmoid(logits). Logits and target are [B, ...].
Variable soft_dice_loss(const Variable& logits, const Tensor& target, double smooth = 1e-6);

// 0.5 * BCE + 0.5 * soft Dice.
Variable segmentation_loss(const Variable& logits, const Tensor& target);

}  // namespace fseg
