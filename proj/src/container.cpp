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

#include "fseg/container.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fseg/error.hpp"

namespace fseg {

const Tensor* TensorContainer::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const std::string* TensorContainer::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(le(1, what)); }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  double f64(const char* what) { return std::bit_cast<double>(le(8, what)); }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const std::string& what) const {
    if (in_.size() - pos_ < n) {
      throw LoadError("truncated container: " + what + " at byte offset " +
                      std::to_string(pos_) + " needs " + std::to_string(n) +
                      " bytes, only " + std::to_string(in_.size() - pos_) + " remain");
    }
  }
  bool at_end() const { return pos_ == in_.size(); }
  std::size_t size() const { return in_.size(); }

 private:
  std::uint64_t le(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

std::string encode_meta(const std::vector<std::pair<std::string, std::string>>& meta) {
  std::string s;
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw IoError("metadata entry '" + k + "' cannot be encoded");
    }
    s += k + " = " + v + "\n";
  }
  return s;
}

std::vector<std::pair<std::string, std::string>> decode_meta(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> meta;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw LoadError("malformed metadata line '" + line + "'");
    meta.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  return meta;
}

}  // namespace

std::vector<std::uint8_t> serialize(const TensorContainer& c) {
  Writer w;
  w.bytes("FSEG");
  w.u32(TensorContainer::kVersion);
  const std::string meta = encode_meta(c.meta);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    if (name.size() > 0xFFFF) throw IoError("tensor name too long: " + name.substr(0, 32));
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f64(v);
  }
  return w.take();
}

TensorContainer deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.bytes(4, "magic") != "FSEG") throw LoadError("bad magic: not an FSEG container");
  const std::uint32_t version = r.u32("version");
  if (version != TensorContainer::kVersion) {
    throw LoadError("unsupported container version " + std::to_string(version) +
                    " (reader supports version " + std::to_string(TensorContainer::kVersion) +
                    ")");
  }
  TensorContainer c;
  const std::uint32_t meta_len = r.u32("metadata length");
  c.meta = decode_meta(r.bytes(meta_len, "metadata block"));
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16("tensor name length");
    std::string name = r.bytes(name_len, "tensor name");
    const std::uint8_t rank = r.u8("tensor rank");
    Shape shape;
    for (std::uint8_t k = 0; k < rank; ++k) shape.push_back(r.u32("tensor dims"));
    const std::size_t n = shape_numel(shape);
    const std::size_t payload = n * 8;
    if (bytes.size() - r.offset() < payload) {
      throw LoadError("truncated payload for tensor '" + name + "' at byte offset " +
                      std::to_string(r.offset()) + ": expected length at least " +
                      std::to_string(r.offset() + payload) + " bytes, actual length " +
                      std::to_string(bytes.size()));
    }
    std::vector<double> data(n);
    for (double& v : data) v = r.f64("payload");
    c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.at_end()) {
    throw LoadError("trailing bytes after tensor table at byte offset " +
                    std::to_string(r.offset()) + ": expected length " +
                    std::to_string(r.offset()) + ", actual length " + std::to_string(r.size()));
  }
  return c;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

void write_container(const TensorContainer& c, const std::string& path) {
  write_file_bytes(serialize(c), path);
}

TensorContainer read_container(const std::string& path) {
  try {
    return deserialize(read_file_bytes(path));
  } catch (const LoadError& e) {
    throw LoadError(path + ": " + e.what());
  }
}

}  // namespace fseg
