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

#include "fseg/checkpoint.hpp"

#include <cstdio>
#include <map>

#include "fseg/error.hpp"

namespace fseg {

namespace {

constexpr const char* kEpoch = "checkpoint.epoch";
constexpr const char* kValDice = "checkpoint.val_dice";
constexpr const char* kSeed = "checkpoint.seed";

}  // namespace

TensorContainer make_checkpoint(const SegmentationModel& model, const Config& config,
                                const CheckpointMeta& meta) {
  Config stored = config;
  stored.model = model.config();
  TensorContainer c;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", meta.val_dice);
  c.meta.emplace_back(kEpoch, std::to_string(meta.epoch));
  c.meta.emplace_back(kValDice, buf);
  c.meta.emplace_back(kSeed, std::to_string(meta.seed));
  for (auto& kv : to_key_values(stored)) c.meta.push_back(std::move(kv));
  for (const Parameter* p : model.parameters()) c.tensors.emplace_back(p->name, p->var.value());
  return c;
}

void save_checkpoint(const SegmentationModel& model, const Config& config,
                     const CheckpointMeta& meta, const std::string& path) {
  write_container(make_checkpoint(model, config, meta), path);
}

Checkpoint checkpoint_from_container(const TensorContainer& container) {
  Checkpoint out;
  KeyValues config_kv;
  bool have_epoch = false, have_dice = false, have_seed = false;
  try {
    for (const auto& [k, v] : container.meta) {
      if (k == kEpoch) {
        out.meta.epoch = std::stoull(v);
        have_epoch = true;
      } else if (k == kValDice) {
        out.meta.val_dice = std::stod(v);
        have_dice = true;
      } else if (k == kSeed) {
        out.meta.seed = std::stoull(v);
        have_seed = true;
      } else {
        config_kv.emplace_back(k, v);
      }
    }
    out.config = from_key_values(config_kv);
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint configuration: ") + e.what());
  } catch (const std::logic_error& e) {
    throw LoadError(std::string("checkpoint metadata: ") + e.what());
  }
  if (!have_epoch || !have_dice || !have_seed) {
    throw LoadError("checkpoint metadata is missing epoch, val_dice or seed");
  }

  out.model = std::make_unique<SegmentationModel>(out.config.model, out.meta.seed);
  std::map<std::string, const Tensor*> stored;
  for (const auto& [name, t] : container.tensors) {
    if (!stored.emplace(name, &t).second) throw LoadError("duplicate tensor '" + name + "'");
  }
  for (Parameter* p : out.model->parameters()) {
    const auto it = stored.find(p->name);
    if (it == stored.end()) throw LoadError("checkpoint is missing tensor '" + p->name + "'");
    if (it->second->shape() != p->var.shape()) {
      throw LoadError("tensor '" + p->name + "' has shape " + shape_str(it->second->shape()) +
                      ", model expects " + shape_str(p->var.shape()));
    }
    p->var.mutable_value() = *it->second;
    stored.erase(it);
  }
  if (!stored.empty()) {
    throw LoadError("checkpoint has unknown tensor '" + stored.begin()->first + "'");
  }
  return out;
}

Checkpoint load_checkpoint(const std::string& path) {
  const TensorContainer container = read_container(path);
  try {
    return checkpoint_from_container(container);
  } catch (const LoadError& e) {
    throw LoadError(path + ": " + e.what());
  }
}

}  // namespace fseg
