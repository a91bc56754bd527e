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

#include <ostream>
#include <string>
#include <vector>

#include "fseg/config.hpp"
#include "fseg/data.hpp"

namespace fseg {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

// `args` excludes the program name. Subcommands: synth, train, eval,
// ablate, gradcheck, overlay.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Samples from `manifest`, or the synthetic set described by config.data
// when `manifest` is empty.
std::vector<Sample> load_dataset(const Config& config, const std::string& manifest);

}  // namespace fseg
