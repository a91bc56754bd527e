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

#include "fseg/tensor.hpp"

namespace fseg {

// On-disk tensor container shared by checkpoints and encoder weight files.
//
//   "FSEG"              4 bytes magic
//   u32 version         currently 1
//   u32 meta_len        followed by meta_len bytes of UTF-8 "key = value\n" lines
//   u32 count           number of tensors
//   per tensor: u16 name_len, name bytes, u8 rank, rank x u32 dims,
//               prod(dims) x f64 payload in row-major order
//
// All integers and floats are little-endian.
struct TensorContainer {
  static constexpr std::uint32_t kVersion = 1;

  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
  const std::string* meta_value(const std::string& key) const;
};

std::vector<std::uint8_t> serialize(const TensorContainer& c);
TensorContainer deserialize(const std::vector<std::uint8_t>& bytes);

void write_container(const TensorContainer& c, const std::string& path);
TensorContainer read_container(const std::string& path);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::vector<std::uint8_t>& bytes, const std::string& path);

}  // namespace fseg
