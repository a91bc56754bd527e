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
#include <string>
#include <vector>

namespace fseg {

struct OpGradCheck {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
};

inline constexpr double kGradCheckTolerance = 1e-4;

// Central-difference checks (eps 1e-5) of every differentiable op on small
// random inputs, followed by an end-to-end check of a tiny model (8x8 image,
// patch 4, 2 blocks, 2 decoder stages) with its encoder unfrozen.
std::vector<OpGradCheck> run_gradcheck_suite(std::uint64_t seed = 0);

std::string render_gradcheck_table(const std::vector<OpGradCheck>& checks);

bool gradcheck_passed(const std::vector<OpGradCheck>& checks,
                      double tolerance = kGradCheckTolerance);

}  // namespace fseg
