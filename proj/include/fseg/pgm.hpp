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

#include "fseg/data.hpp"

namespace fseg {

// Binary 8-bit greymap: "P5\n<width> <height>\n255\n" + width*height bytes.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, top-left origin
};

GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& image, const std::string& path);

// [1, H, W] or [H, W] tensor <-> bytes.
GrayImage to_gray(const Tensor& plane, double scale = 255.0);

// Image bytes / 255 (replicated to `channels`); mask bytes >= 128 -> 1.
Sample load_sample(const std::string& image_path, const std::string& mask_path,
                   const std::string& patient_id = {}, std::size_t channels = 1);
// Writes {0, 255}.
void save_mask(const Tensor& mask, const std::string& path);
// Writes round(255 * clamp(v, 0, 1)) of the first channel.
void save_image(const Tensor& image, const std::string& path);

struct ManifestEntry {
  std::string patient_id;
  std::string image_path;
  std::string mask_path;
};

// Tab-separated: patient_id, image_path, mask_path. Relative paths resolve
// against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<Sample> load_manifest(const std::string& path, std::size_t channels = 1);

// Writes <dir>/images/<id>_<slice>.pgm, <dir>/masks/... and <dir>/manifest.tsv.
std::string write_dataset(const std::vector<Sample>& samples, const std::string& dir);

}  // namespace fseg
