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

#include "fseg/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fseg/error.hpp"

namespace fs = std::filesystem;

namespace fseg {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
bool header_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos, std::string& tok) {
  tok.clear();
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    tok.push_back(static_cast<char>(bytes[pos++]));
  }
  return !tok.empty();
}

std::size_t parse_dim(const std::string& tok, const std::string& path, const char* what) {
  std::size_t used = 0;
  long v = -1;
  try {
    v = std::stol(tok, &used);
  } catch (const std::exception&) {
  }
  if (used != tok.size() || v <= 0) {
    throw IoError(path + ": malformed PGM header (" + what + " '" + tok + "')");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  std::string tok;
  if (!header_token(bytes, pos, tok) || tok != "P5") {
    throw IoError(path + ": malformed PGM header (expected magic P5)");
  }
  GrayImage img;
  if (!header_token(bytes, pos, tok)) throw IoError(path + ": malformed PGM header (width)");
  img.width = parse_dim(tok, path, "width");
  if (!header_token(bytes, pos, tok)) throw IoError(path + ": malformed PGM header (height)");
  img.height = parse_dim(tok, path, "height");
  if (!header_token(bytes, pos, tok) || tok != "255") {
    throw IoError(path + ": malformed PGM header (maxval must be 255)");
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw IoError(path + ": malformed PGM header (missing separator before raster)");
  }
  ++pos;
  const std::size_t n = img.width * img.height;
  if (bytes.size() - pos != n) {
    throw IoError(path + ": raster holds " + std::to_string(bytes.size() - pos) +
                  " bytes, header declares " + std::to_string(n));
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void write_pgm(const GrayImage& image, const std::string& path) {
  if (image.pixels.size() != image.width * image.height) {
    throw IoError(path + ": pixel count does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError(path + ": write failed");
}

GrayImage to_gray(const Tensor& plane, double scale) {
  const std::size_t h = plane.dim(plane.rank() - 2);
  const std::size_t w = plane.dim(plane.rank() - 1);
  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(plane[i] * scale, 0.0, 255.0)));
  }
  return img;
}

Sample load_sample(const std::string& image_path, const std::string& mask_path,
                   const std::string& patient_id, std::size_t channels) {
  const GrayImage img = read_pgm(image_path);
  const GrayImage msk = read_pgm(mask_path);
  if (img.width != msk.width || img.height != msk.height) {
    throw IoError(mask_path + ": mask is " + std::to_string(msk.width) + "x" +
                  std::to_string(msk.height) + " but image " + image_path + " is " +
                  std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  Sample s;
  s.patient_id = patient_id;
  const std::size_t n = img.width * img.height;
  s.image = Tensor({channels, img.height, img.width});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < n; ++i) s.image[c * n + i] = img.pixels[i] / 255.0;
  }
  s.mask = Tensor({1, msk.height, msk.width});
  for (std::size_t i = 0; i < n; ++i) s.mask[i] = msk.pixels[i] >= 128 ? 1.0 : 0.0;
  return s;
}

void save_mask(const Tensor& mask, const std::string& path) {
  Tensor binary = mask;
  for (double& v : binary.data()) v = v >= 0.5 ? 1.0 : 0.0;
  write_pgm(to_gray(binary), path);
}

void save_image(const Tensor& image, const std::string& path) {
  const std::size_t h = image.dim(image.rank() - 2);
  const std::size_t w = image.dim(image.rank() - 1);
  Tensor plane({h, w}, std::vector<double>(image.raw(), image.raw() + h * w));
  write_pgm(to_gray(plane), path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open manifest");
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields, got " +
                    std::to_string(fields.size()));
    }
    out.push_back({fields[0], resolve(fields[1]), resolve(fields[2])});
  }
  if (out.empty()) throw IoError(path + ": manifest lists no samples");
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  for (const ManifestEntry& e : entries) {
    out << e.patient_id << '\t' << e.image_path << '\t' << e.mask_path << '\n';
  }
  if (!out) throw IoError(path + ": write failed");
}

std::vector<Sample> load_manifest(const std::string& path, std::size_t channels) {
  std::vector<Sample> out;
  for (const ManifestEntry& e : read_manifest(path)) {
    out.push_back(load_sample(e.image_path, e.mask_path, e.patient_id, channels));
  }
  const Shape& first = out.front().image.shape();
  for (const Sample& s : out) {
    if (s.image.shape() != first) throw IoError(path + ": samples differ in image size");
  }
  return out;
}

std::string write_dataset(const std::vector<Sample>& samples, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  std::vector<ManifestEntry> entries;
  std::string last;
  std::size_t slice = 0;
  for (const Sample& s : samples) {
    slice = s.patient_id == last ? slice + 1 : 0;
    last = s.patient_id;
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03zu.pgm", s.patient_id.c_str(), slice);
    const std::string img = std::string("images/") + name;
    const std::string msk = std::string("masks/") + name;
    save_image(s.image, (fs::path(dir) / img).string());
    save_mask(s.mask, (fs::path(dir) / msk).string());
    entries.push_back({s.patient_id, img, msk});
  }
  const std::string manifest = (fs::path(dir) / "manifest.tsv").string();
  write_manifest(entries, manifest);
  return manifest;
}

}  // namespace fseg
