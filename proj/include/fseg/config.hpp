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
#include <utility>
#include <vector>

#include "fseg/data.hpp"
#include "fseg/model.hpp"
#include "fseg/training.hpp"

namespace fseg {

struct DataConfig {
  std::size_t num_patients = 60;
  std::size_t slices_per_patient = 8;
  std::uint64_t seed = 42;
  SplitSpec split{0.7, 0.1, 0.2, 0};
};

struct Config {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::string encoder_weights;  // optional pretrained encoder container

  void validate() const;
};

// Full-size geometry: ViT-B/14-like encoder at 448x448 with the reference
// optimizer recipe.
Config default_config();

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// `key = value` lines with `#` comments. An `encoder.preset` line, if any,
// is applied before every other key. Throws ConfigError naming the line
// and key for unknown keys or unparseable values, and for invariant
// violations of the final configuration.
Config parse_config_text(const std::string& text, const std::string& source = "<config>");
Config parse_config(const std::string& path);

// Applies `overrides` (later entries win) on top of `base`, then validates.
Config apply_overrides(Config base, const KeyValues& overrides);

void set_config_value(Config& config, const std::string& key, const std::string& value);
// Every key in canonical order with its current value; parse_config_text
// of the joined lines reproduces the configuration exactly.
KeyValues to_key_values(const Config& config);
Config from_key_values(const KeyValues& kv);

std::string config_text(const Config& config);

}  // namespace fseg
