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

#include "fseg/encoder.hpp"

#include <cmath>
#include <random>

#include <set>

#include "fseg/container.hpp"
#include "fseg/error.hpp"
#include "fseg/ops.hpp"

namespace fseg {

void EncoderConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("encoder: " + msg); };
  if (patch_size == 0) fail("patch_size must be positive");
  if (embed_dim == 0) fail("embed_dim must be positive");
  if (num_blocks == 0) fail("num_blocks must be positive");
  if (num_heads == 0) fail("num_heads must be positive");
  if (mlp_ratio == 0) fail("mlp_ratio must be positive");
  if (in_channels == 0) fail("in_channels must be positive");
  if (image_height == 0 || image_width == 0) fail("image size must be positive");
  if (image_height % patch_size != 0 || image_width % patch_size != 0) {
    fail("image size " + std::to_string(image_height) + "x" + std::to_string(image_width) +
         " is not divisible by patch_size " + std::to_string(patch_size));
  }
  if (embed_dim % num_heads != 0) {
    fail("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
         std::to_string(num_heads));
  }
}

EncoderConfig EncoderConfig::preset(const std::string& name) {
  EncoderConfig c;
  if (name == "base" || name == "desk") return c;
  if (name == "large") {
    c.embed_dim = 96;
    c.num_blocks = 12;
    c.num_heads = 6;
    return c;
  }
  if (name == "giant") {
    c.embed_dim = 128;
    c.num_blocks = 16;
    c.num_heads = 8;
    return c;
  }
  c.patch_size = 14;
  c.image_height = c.image_width = 448;
  c.in_channels = 3;
  if (name == "vitb14") {
    c.embed_dim = 768;
    c.num_blocks = 12;
    c.num_heads = 12;
  } else if (name == "vitl14") {
    c.embed_dim = 1024;
    c.num_blocks = 24;
    c.num_heads = 16;
  } else if (name == "vitg14") {
    c.embed_dim = 1536;
    c.num_blocks = 40;
    c.num_heads = 24;
  } else {
    throw ConfigError("unknown encoder preset '" + name + "'");
  }
  return c;
}

Tensor patchify(const Tensor& images, std::size_t p) {
  if (images.rank() != 4) throw ShapeError("patchify: expected [B, C, H, W], got " +
                                           shape_str(images.shape()));
  const std::size_t b = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  if (p == 0 || h % p != 0 || w % p != 0) {
    throw ConfigError("patchify: image " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible by patch size " + std::to_string(p));
  }
  const std::size_t gh = h / p, gw = w / p, len = p * p * c;
  Tensor out({b, gh * gw, len});
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t ti = 0; ti < gh; ++ti) {
      for (std::size_t tj = 0; tj < gw; ++tj) {
        double* dst = out.raw() + (n * gh * gw + ti * gw + tj) * len;
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t r = 0; r < p; ++r) {
            const double* src = images.raw() + ((n * c + ch) * h + ti * p + r) * w + tj * p;
            std::copy(src, src + p, dst + (ch * p + r) * p);
          }
        }
      }
    }
  }
  return out;
}

Tensor depatchify(const Tensor& patches, std::size_t c, std::size_t h, std::size_t w,
                  std::size_t p) {
  if (p == 0 || h % p != 0 || w % p != 0) {
    throw ConfigError("depatchify: image size not divisible by patch size");
  }
  const std::size_t gh = h / p, gw = w / p, len = p * p * c;
  if (patches.rank() != 3 || patches.dim(1) != gh * gw || patches.dim(2) != len) {
    throw ShapeError("depatchify: patches " + shape_str(patches.shape()) +
                     " do not match the requested image geometry");
  }
  const std::size_t b = patches.dim(0);
  Tensor out({b, c, h, w});
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t ti = 0; ti < gh; ++ti) {
      for (std::size_t tj = 0; tj < gw; ++tj) {
        const double* src = patches.raw() + (n * gh * gw + ti * gw + tj) * len;
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t r = 0; r < p; ++r) {
            const double* row = src + (ch * p + r) * p;
            std::copy(row, row + p, out.raw() + ((n * c + ch) * h + ti * p + r) * w + tj * p);
          }
        }
      }
    }
  }
  return out;
}

Variable embed_patches(const Variable& patches, const Variable& projection,
                       const Variable& bias, const Variable& positional) {
  if (patches.value().rank() != 3 || projection.value().rank() != 2 ||
      patches.dim(2) != projection.dim(0)) {
    throw ShapeError("embed_patches: projection " + shape_str(projection.shape()) +
                     " does not map patches " + shape_str(patches.shape()));
  }
  if (positional.shape() != Shape{patches.dim(1), projection.dim(1)}) {
    throw ShapeError("embed_patches: positional table " + shape_str(positional.shape()) +
                     " must be [N, D] = [" + std::to_string(patches.dim(1)) + ", " +
                     std::to_string(projection.dim(1)) + "]");
  }
  return ops::add_bias(ops::linear(patches, projection, bias), positional);
}

std::size_t Encoder::add(std::string name, Tensor value) {
  params_.emplace_back("encoder." + std::move(name), std::move(value), true);
  return params_.size() - 1;
}

namespace {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t({fan_in, fan_out});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

Encoder::Encoder(const EncoderConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t d = config_.embed_dim;
  const std::size_t hidden = d * config_.mlp_ratio;
  const std::size_t pd = config_.patch_dim();
  patch_w_ = add("patch_embed.weight",
                 normal_tensor({pd, d}, 1.0 / std::sqrt(static_cast<double>(pd)), rng));
  patch_b_ = add("patch_embed.bias", Tensor::zeros({d}));
  pos_ = add("pos_embed", normal_tensor({config_.num_tokens(), d}, 0.02, rng));
  for (std::size_t i = 0; i < config_.num_blocks; ++i) {
    const std::string pre = "blocks." + std::to_string(i) + ".";
    BlockSlots s{};
    s.norm1_w = add(pre + "norm1.weight", Tensor::ones({d}));
    s.norm1_b = add(pre + "norm1.bias", Tensor::zeros({d}));
    s.q_w = add(pre + "attn.q.weight", xavier_uniform(d, d, rng));
    s.q_b = add(pre + "attn.q.bias", Tensor::zeros({d}));
    s.k_w = add(pre + "attn.k.weight", xavier_uniform(d, d, rng));
    s.k_b = add(pre + "attn.k.bias", Tensor::zeros({d}));
    s.v_w = add(pre + "attn.v.weight", xavier_uniform(d, d, rng));
    s.v_b = add(pre + "attn.v.bias", Tensor::zeros({d}));
    s.proj_w = add(pre + "attn.proj.weight", xavier_uniform(d, d, rng));
    s.proj_b = add(pre + "attn.proj.bias", Tensor::zeros({d}));
    s.norm2_w = add(pre + "norm2.weight", Tensor::ones({d}));
    s.norm2_b = add(pre + "norm2.bias", Tensor::zeros({d}));
    s.fc1_w = add(pre + "mlp.fc1.weight", xavier_uniform(d, hidden, rng));
    s.fc1_b = add(pre + "mlp.fc1.bias", Tensor::zeros({hidden}));
    s.fc2_w = add(pre + "mlp.fc2.weight", xavier_uniform(hidden, d, rng));
    s.fc2_b = add(pre + "mlp.fc2.bias", Tensor::zeros({d}));
    blocks_.push_back(s);
  }
}

std::vector<BlockFeatures> Encoder::forward(const Tensor& images) const {
  return forward(Variable(images, false));
}

std::vector<BlockFeatures> Encoder::forward(const Variable& images) const {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != config_.in_channels || s[2] != config_.image_height ||
      s[3] != config_.image_width) {
    throw ShapeError("encoder: expected images [B, " + std::to_string(config_.in_channels) +
                     ", " + std::to_string(config_.image_height) + ", " +
                     std::to_string(config_.image_width) + "], got " + shape_str(s));
  }
  // patchify is a pure permutation; route gradients through it when the
  // caller asks for input gradients.
  Tensor patches = patchify(images.value(), config_.patch_size);
  Variable tokens_in;
  if (images.requires_grad()) {
    const EncoderConfig cfg = config_;
    tokens_in = Variable::from_op(std::move(patches), {images}, [cfg](Node& self) {
      Tensor g = depatchify(self.grad, cfg.in_channels, cfg.image_height, cfg.image_width,
                            cfg.patch_size);
      accumulate(self.input_grad(0), g);
    });
  } else {
    tokens_in = Variable(std::move(patches), false);
  }

  Variable x = embed_patches(tokens_in, param(patch_w_), param(patch_b_), param(pos_));
  std::vector<BlockFeatures> out;
  out.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const BlockSlots& b = blocks_[i];
    Variable h = ops::layer_norm(x, param(b.norm1_w), param(b.norm1_b));
    Variable q = ops::linear(h, param(b.q_w), param(b.q_b));
    Variable k = ops::linear(h, param(b.k_w), param(b.k_b));
    Variable v = ops::linear(h, param(b.v_w), param(b.v_b));
    Variable a = ops::attention(q, k, v, config_.num_heads);
    x = ops::add(x, ops::linear(a, param(b.proj_w), param(b.proj_b)));
    h = ops::layer_norm(x, param(b.norm2_w), param(b.norm2_b));
    h = ops::gelu(ops::linear(h, param(b.fc1_w), param(b.fc1_b)));
    x = ops::add(x, ops::linear(h, param(b.fc2_w), param(b.fc2_b)));
    if (!x.value().all_finite()) {
      throw NumericError("encoder: non-finite activation in block " + std::to_string(i));
    }
    out.push_back({i, x});
  }
  return out;
}

void Encoder::save_weights(const std::string& path) const {
  TensorContainer c;
  c.meta = {{"kind", "encoder"},
            {"encoder.patch_size", std::to_string(config_.patch_size)},
            {"encoder.embed_dim", std::to_string(config_.embed_dim)},
            {"encoder.num_blocks", std::to_string(config_.num_blocks)}};
  for (const Parameter& p : params_) c.tensors.emplace_back(p.name, p.var.value());
  write_container(c, path);
}

void Encoder::load_weights(const std::string& path) {
  const TensorContainer c = read_container(path);
  std::set<std::string> known;
  for (const Parameter& p : params_) known.insert(p.name);
  std::set<std::string> seen;
  for (const auto& [name, t] : c.tensors) {
    if (!known.count(name)) throw LoadError(path + ": unexpected tensor '" + name + "'");
    if (!seen.insert(name).second) throw LoadError(path + ": duplicate tensor '" + name + "'");
  }
  std::vector<const Tensor*> bound;
  for (const Parameter& p : params_) {
    const Tensor* t = c.find(p.name);
    if (!t) throw LoadError(path + ": missing tensor '" + p.name + "'");
    if (t->shape() != p.var.shape()) {
      throw LoadError(path + ": tensor '" + p.name + "' has shape " + shape_str(t->shape()) +
                      ", expected " + shape_str(p.var.shape()));
    }
    bound.push_back(t);
  }
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].var.mutable_value() = *bound[i];
}

}  // namespace fseg
