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

#include <cstddef>
#include <functional>
#include <vector>

#include "fseg/autograd.hpp"

namespace fseg {

struct GradCheckResult {
  double max_rel_error = 0.0;
  // Location and values of the worst coordinate.
  std::size_t param = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of `loss` with central differences over
// every coordinate of `params`. The error of one coordinate is
// |analytic - numeric| / max(1, |analytic|, |numeric|). `loss` must rebuild
// the graph from the current parameter values on each call.
GradCheckResult grad_check(const std::function<Variable()>& loss,
                           const std::vector<Variable>& params, double eps = 1e-5);

}  // namespace fseg
