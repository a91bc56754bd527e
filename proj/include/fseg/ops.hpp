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
#include <vector>

#include "fseg/autograd.hpp"

// Differentiable primitives. Every function records its backward pass when
// any operand requires grad and is a plain forward evaluation otherwise.
namespace fseg::ops {

Variable add(const Variable& a, const Variable& b);
Variable sub(const Variable& a, const Variable& b);
Variable mul(const Variable& a, const Variable& b);
Variable scale(const Variable& a, double factor);
// x + bias broadcast over leading axes; bias matches the trailing dims of x.
Variable add_bias(const Variable& x, const Variable& bias);

// a[..., M, K] x b[..., K, P]; b may also be a plain [K, P] matrix shared
// across the leading batch dimensions of a.
Variable matmul(const Variable& a, const Variable& b);
// Dense layer: x[..., In] * weight[In, Out] + bias[Out].
Variable linear(const Variable& x, const Variable& weight, const Variable& bias);

Variable reshape(const Variable& x, Shape shape);
// Swaps the last two axes.
Variable transpose_last2(const Variable& x);

Variable gelu(const Variable& x);
Variable sigmoid(const Variable& x);
// Softmax over the last axis, max-subtracted.
Variable softmax(const Variable& x);
// Per-row normalization over the last axis with affine gamma/beta.
Variable layer_norm(const Variable& x, const Variable& gamma, const Variable& beta,
                    double eps = 1e-6);

// Scaled dot-product multi-head attention on q, k, v of shape [B, N, D];
// heads split D into contiguous slices.
Variable attention(const Variable& q, const Variable& k, const Variable& v,
                   std::size_t num_heads);

Variable sum(const Variable& x);
Variable mean(const Variable& x);

// Concatenation along axis 1 (the channel axis of [B, C, H, W]).
Variable concat_channels(const std::vector<Variable>& parts);
// Inverse of concat_channels on plain tensors.
std::vector<Tensor> split_channels(const Tensor& x, const std::vector<std::size_t>& sizes);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Cross-correlation: input [B, Cin, H, W], kernel [Cout, Cin, kh, kw],
// bias [Cout] or undefined.
Variable conv2d(const Variable& input, const Variable& kernel, const Variable& bias,
                Conv2dOptions options = {});
// Padding that keeps H, W for an odd kernel at stride 1.
inline std::size_t same_padding(std::size_t kernel) { return kernel / 2; }

// Transposed convolution, kernel 2x2 stride 2: input [B, Cin, H, W],
// kernel [Cin, Cout, 2, 2], bias [Cout] or undefined -> [B, Cout, 2H, 2W].
Variable upsample2x(const Variable& input, const Variable& kernel, const Variable& bias);

// Bilinear interpolation with half-pixel centers (align_corners = false).
Variable resize_bilinear(const Variable& input, std::size_t out_h, std::size_t out_w);

}  // namespace fseg::ops
