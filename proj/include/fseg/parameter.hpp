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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fseg/autograd.hpp"

namespace fseg {

using Rng = std::mt19937_64;

// A named model weight. Frozen parameters never require grad and the
// optimizer skips them.
struct Parameter {
  std::string name;
  Variable var;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor value, bool is_frozen)
      : name(std::move(n)), var(std::move(value), !is_frozen), frozen(is_frozen) {}

  void set_frozen(bool on) {
    frozen = on;
    var.set_requires_grad(!on);
  }
};

Tensor normal_tensor(Shape shape, double stddev, Rng& rng);

}  // namespace fseg
