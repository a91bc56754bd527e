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

#include "fseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fseg/error.hpp"
#include "gemm.hpp"

namespace fseg::ops {

using detail::gemm;

namespace {

void require_same_shape(const Variable& a, const Variable& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const Variable& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(x.shape()));
  }
}

// Applies f elementwise and records df/dx computed from (x, y).
template <typename F, typename D>
Variable unary(const Variable& x, F f, D df) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = f(xv[i]);
  return Variable::from_op(std::move(y), {x}, [df](Node& self) {
    const Tensor& xv = self.input_value(0);
    Tensor& gx = self.input_grad(0);
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      gx[i] += self.grad[i] * df(xv[i], self.value[i]);
    }
  });
}

}  // namespace

Variable add(const Variable& a, const Variable& b) {
  require_same_shape(a, b, "add");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += b.value()[i];
  return Variable::from_op(std::move(y), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (self.input_requires_grad(k)) accumulate(self.input_grad(k), self.grad);
    }
  });
}

Variable sub(const Variable& a, const Variable& b) {
  require_same_shape(a, b, "sub");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= b.value()[i];
  return Variable::from_op(std::move(y), {a, b}, [](Node& self) {
    if (self.input_requires_grad(0)) accumulate(self.input_grad(0), self.grad);
    if (self.input_requires_grad(1)) {
      Tensor& gb = self.input_grad(1);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] -= self.grad[i];
    }
  });
}

Variable mul(const Variable& a, const Variable& b) {
  require_same_shape(a, b, "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= b.value()[i];
  return Variable::from_op(std::move(y), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!self.input_requires_grad(k)) continue;
      const Tensor& other = self.input_value(1 - k);
      Tensor& g = self.input_grad(k);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * other[i];
    }
  });
}

Variable scale(const Variable& a, double factor) {
  Tensor y = a.value();
  for (double& v : y.data()) v *= factor;
  return Variable::from_op(std::move(y), {a}, [factor](Node& self) {
    Tensor& g = self.input_grad(0);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * factor;
  });
}

Variable add_bias(const Variable& x, const Variable& bias) {
  const Shape& xs = x.shape();
  const Shape& bs = bias.shape();
  if (bs.size() > xs.size() || !std::equal(bs.rbegin(), bs.rend(), xs.rbegin())) {
    throw ShapeError("add_bias: bias " + shape_str(bs) + " does not match the trailing dims of " +
                     shape_str(xs));
  }
  const std::size_t d = bias.value().numel();
  Tensor y = x.value();
  const std::size_t rows = y.numel() / d;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) y[r * d + j] += bias.value()[j];
  }
  return Variable::from_op(std::move(y), {x, bias}, [rows, d](Node& self) {
    if (self.input_requires_grad(0)) accumulate(self.input_grad(0), self.grad);
    if (self.input_requires_grad(1)) {
      Tensor& gb = self.input_grad(1);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) gb[j] += self.grad[r * d + j];
      }
    }
  });
}

Variable matmul(const Variable& a, const Variable& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) throw ShapeError("matmul: operands need rank >= 2");
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t kb = sb[sb.size() - 2];
  const std::size_t p = sb.back();
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(sa) + " x " + shape_str(sb));
  }
  const bool shared_rhs = sb.size() == 2;
  if (!shared_rhs && !std::equal(sa.begin(), sa.end() - 2, sb.begin(), sb.end() - 2)) {
    throw ShapeError("matmul: batch dimensions differ, " + shape_str(sa) + " x " +
                     shape_str(sb));
  }
  const std::size_t batch = a.value().numel() / (m * k);
  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(p);
  Tensor y(out_shape);
  if (shared_rhs) {
    gemm(false, false, batch * m, p, k, a.value().raw(), b.value().raw(), y.raw(), false);
  } else {
    for (std::size_t i = 0; i < batch; ++i) {
      gemm(false, false, m, p, k, a.value().raw() + i * m * k, b.value().raw() + i * k * p,
           y.raw() + i * m * p, false);
    }
  }
  return Variable::from_op(std::move(y), {a, b}, [=](Node& self) {
    const Tensor& av = self.input_value(0);
    const Tensor& bv = self.input_value(1);
    const double* g = self.grad.raw();
    if (shared_rhs) {
      if (self.input_requires_grad(0)) {
        gemm(false, true, batch * m, k, p, g, bv.raw(), self.input_grad(0).raw(), true);
      }
      if (self.input_requires_grad(1)) {
        gemm(true, false, k, p, batch * m, av.raw(), g, self.input_grad(1).raw(), true);
      }
      return;
    }
    for (std::size_t i = 0; i < batch; ++i) {
      if (self.input_requires_grad(0)) {
        gemm(false, true, m, k, p, g + i * m * p, bv.raw() + i * k * p,
             self.input_grad(0).raw() + i * m * k, true);
      }
      if (self.input_requires_grad(1)) {
        gemm(true, false, k, p, m, av.raw() + i * m * k, g + i * m * p,
             self.input_grad(1).raw() + i * k * p, true);
      }
    }
  });
}

Variable linear(const Variable& x, const Variable& weight, const Variable& bias) {
  Variable y = matmul(x, weight);
  return bias.defined() ? add_bias(y, bias) : y;
}

Variable reshape(const Variable& x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  return Variable::from_op(std::move(y), {x}, [](Node& self) {
    Tensor& g = self.input_grad(0);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

namespace {

void transpose_blocks(const double* src, double* dst, std::size_t batch, std::size_t rows,
                      std::size_t cols, bool accumulate) {
  for (std::size_t b = 0; b < batch; ++b) {
    const double* s = src + b * rows * cols;
    double* d = dst + b * rows * cols;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (accumulate) {
          d[c * rows + r] += s[r * cols + c];
        } else {
          d[c * rows + r] = s[r * cols + c];
        }
      }
    }
  }
}

}  // namespace

Variable transpose_last2(const Variable& x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ShapeError("transpose_last2: rank < 2");
  const std::size_t rows = s[s.size() - 2];
  const std::size_t cols = s.back();
  const std::size_t batch = x.value().numel() / (rows * cols);
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  Tensor y(out_shape);
  transpose_blocks(x.value().raw(), y.raw(), batch, rows, cols, false);
  return Variable::from_op(std::move(y), {x}, [=](Node& self) {
    transpose_blocks(self.grad.raw(), self.input_grad(0).raw(), batch, cols, rows, true);
  });
}

Variable gelu(const Variable& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v, double) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

namespace {

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Variable sigmoid(const Variable& x) {
  return unary(x, stable_sigmoid, [](double, double s) { return s * (1.0 - s); });
}

Variable softmax(const Variable& x) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.shape().back();
  const std::size_t rows = xv.numel() / d;
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.raw() + r * d;
    double* out = y.raw() + r * d;
    const double mx = *std::max_element(in, in + d);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      out[j] = std::exp(in[j] - mx);
      total += out[j];
    }
    for (std::size_t j = 0; j < d; ++j) out[j] /= total;
  }
  return Variable::from_op(std::move(y), {x}, [rows, d](Node& self) {
    Tensor& gx = self.input_grad(0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = self.value.raw() + r * d;
      const double* gr = self.grad.raw() + r * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += yr[j] * (gr[j] - dot);
    }
  });
}

Variable layer_norm(const Variable& x, const Variable& gamma, const Variable& beta,
                    double eps) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: affine parameters must be [" + std::to_string(d) + "]");
  }
  const std::size_t rows = xv.numel() / d;
  Tensor y(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.raw() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (in[j] - mu) * rstd[r];
      xhat[r * d + j] = h;
      y[r * d + j] = h * gamma.value()[j] + beta.value()[j];
    }
  }
  return Variable::from_op(
      std::move(y), {x, gamma, beta},
      [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        const Tensor& g = self.grad;
        const Tensor& gm = self.input_value(1);
        if (self.input_requires_grad(1)) {
          Tensor& gg = self.input_grad(1);
          for (std::size_t i = 0; i < g.numel(); ++i) gg[i % d] += g[i] * xhat[i];
        }
        if (self.input_requires_grad(2)) {
          Tensor& gb = self.input_grad(2);
          for (std::size_t i = 0; i < g.numel(); ++i) gb[i % d] += g[i];
        }
        if (!self.input_requires_grad(0)) return;
        Tensor& gx = self.input_grad(0);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_gh = 0.0;
          double mean_ghh = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[r * d + j] * gm[j];
            mean_gh += gh;
            mean_ghh += gh * xhat[r * d + j];
          }
          mean_gh *= inv_d;
          mean_ghh *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[r * d + j] * gm[j];
            gx[r * d + j] += rstd[r] * (gh - mean_gh - xhat[r * d + j] * mean_ghh);
          }
        }
      });
}

Variable attention(const Variable& q, const Variable& k, const Variable& v,
                   std::size_t num_heads) {
  require_rank(q, 3, "attention");
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  const std::size_t batch = q.dim(0);
  const std::size_t n = q.dim(1);
  const std::size_t d = q.dim(2);
  if (num_heads == 0 || d % num_heads != 0) {
    throw ShapeError("attention: embedding " + std::to_string(d) + " not divisible by " +
                     std::to_string(num_heads) + " heads");
  }
  const std::size_t dh = d / num_heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor y({batch, n, d});
  // Attention probabilities per (batch, head), kept for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(batch * num_heads * n * n);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < num_heads; ++h) {
      const std::size_t off = b * n * d + h * dh;
      double* p = probs->data() + (b * num_heads + h) * n * n;
      detail::gemm_strided(false, true, n, n, dh, q.value().raw() + off, d,
                           k.value().raw() + off, d, p, n, false);
      for (std::size_t r = 0; r < n; ++r) {
        double* row = p + r * n;
        double mx = row[0] * inv_scale;
        for (std::size_t c = 0; c < n; ++c) mx = std::max(mx, row[c] * inv_scale);
        double z = 0.0;
        for (std::size_t c = 0; c < n; ++c) z += (row[c] = std::exp(row[c] * inv_scale - mx));
        const double inv_z = 1.0 / z;
        for (std::size_t c = 0; c < n; ++c) row[c] *= inv_z;
      }
      detail::gemm_strided(false, false, n, dh, n, p, n, v.value().raw() + off, d,
                           y.raw() + off, d, false);
    }
  }
  return Variable::from_op(std::move(y), {q, k, v}, [=](Node& self) {
    const bool need_q = self.input_requires_grad(0);
    const bool need_k = self.input_requires_grad(1);
    const bool need_v = self.input_requires_grad(2);
    std::vector<double> dp(n * n), ds(n * n);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t h = 0; h < num_heads; ++h) {
        const std::size_t off = b * n * d + h * dh;
        const double* qh = self.input_value(0).raw() + off;
        const double* kh = self.input_value(1).raw() + off;
        const double* vh = self.input_value(2).raw() + off;
        const double* go = self.grad.raw() + off;
        const double* p = probs->data() + (b * num_heads + h) * n * n;
        if (need_v) {
          detail::gemm_strided(true, false, n, dh, n, p, n, go, d,
                               self.input_grad(2).raw() + off, d, true);
        }
        if (!need_q && !need_k) continue;
        detail::gemm_strided(false, true, n, n, dh, go, d, vh, d, dp.data(), n, false);
        for (std::size_t r = 0; r < n; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < n; ++c) dot += p[r * n + c] * dp[r * n + c];
          for (std::size_t c = 0; c < n; ++c) {
            ds[r * n + c] = p[r * n + c] * (dp[r * n + c] - dot) * inv_scale;
          }
        }
        if (need_q) {
          detail::gemm_strided(false, false, n, dh, n, ds.data(), n, kh, d,
                               self.input_grad(0).raw() + off, d, true);
        }
        if (need_k) {
          detail::gemm_strided(true, false, n, dh, n, ds.data(), n, qh, d,
                               self.input_grad(1).raw() + off, d, true);
        }
      }
    }
  });
}

Variable sum(const Variable& x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return Variable::from_op(Tensor::scalar(total), {x}, [](Node& self) {
    Tensor& g = self.input_grad(0);
    const double s = self.grad[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s;
  });
}

Variable mean(const Variable& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().numel()));
}

Variable concat_channels(const std::vector<Variable>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no operands");
  const Shape& first = parts.front().shape();
  if (first.size() < 2) throw ShapeError("concat_channels: operands need rank >= 2");
  const std::size_t batch = first[0];
  const std::size_t inner = shape_numel(first) / (first[0] * first[1]);
  std::vector<std::size_t> channels;
  std::size_t total = 0;
  for (const Variable& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || s[0] != batch ||
        !std::equal(s.begin() + 2, s.end(), first.begin() + 2)) {
      throw ShapeError("concat_channels: operand " + shape_str(s) + " does not match " +
                       shape_str(first));
    }
    channels.push_back(s[1]);
    total += s[1];
  }
  Shape out_shape = first;
  out_shape[1] = total;
  Tensor y(out_shape);
  for (std::size_t b = 0; b < batch; ++b) {
    double* dst = y.raw() + b * total * inner;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const double* src = parts[i].value().raw() + b * channels[i] * inner;
      std::copy(src, src + channels[i] * inner, dst);
      dst += channels[i] * inner;
    }
  }
  return Variable::from_op(std::move(y), parts, [=](Node& self) {
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = self.grad.raw() + b * total * inner;
      for (std::size_t i = 0; i < channels.size(); ++i) {
        const std::size_t len = channels[i] * inner;
        if (self.input_requires_grad(i)) {
          double* dst = self.input_grad(i).raw() + b * len;
          for (std::size_t j = 0; j < len; ++j) dst[j] += src[j];
        }
        src += len;
      }
    }
  });
}

std::vector<Tensor> split_channels(const Tensor& x, const std::vector<std::size_t>& sizes) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ShapeError("split_channels: rank < 2");
  std::size_t total = 0;
  for (std::size_t c : sizes) total += c;
  if (total != s[1]) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) + ", tensor has " +
                     std::to_string(s[1]) + " channels");
  }
  const std::size_t inner = x.numel() / (s[0] * s[1]);
  std::vector<Tensor> out;
  std::size_t start = 0;
  for (std::size_t c : sizes) {
    Shape part = s;
    part[1] = c;
    Tensor t(part);
    for (std::size_t b = 0; b < s[0]; ++b) {
      const double* src = x.raw() + (b * s[1] + start) * inner;
      std::copy(src, src + c * inner, t.raw() + b * c * inner);
    }
    out.push_back(std::move(t));
    start += c;
  }
  return out;
}

namespace {

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  std::size_t patch() const { return cin * kh * kw; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

void im2col(const ConvGeometry& g, const double* x, double* col) {
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* row = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oi = 0; oi < g.ho; ++oi) {
          const long ii = static_cast<long>(oi * g.stride + ki) - static_cast<long>(g.pad);
          double* out = row + oi * g.wo;
          if (ii < 0 || ii >= static_cast<long>(g.h)) {
            std::fill(out, out + g.wo, 0.0);
            continue;
          }
          const double* in = x + (c * g.h + static_cast<std::size_t>(ii)) * g.w;
          for (std::size_t oj = 0; oj < g.wo; ++oj) {
            const long jj = static_cast<long>(oj * g.stride + kj) - static_cast<long>(g.pad);
            out[oj] = (jj < 0 || jj >= static_cast<long>(g.w)) ? 0.0 : in[jj];
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* col, double* x) {
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* row = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oi = 0; oi < g.ho; ++oi) {
          const long ii = static_cast<long>(oi * g.stride + ki) - static_cast<long>(g.pad);
          if (ii < 0 || ii >= static_cast<long>(g.h)) continue;
          double* out = x + (c * g.h + static_cast<std::size_t>(ii)) * g.w;
          const double* in = row + oi * g.wo;
          for (std::size_t oj = 0; oj < g.wo; ++oj) {
            const long jj = static_cast<long>(oj * g.stride + kj) - static_cast<long>(g.pad);
            if (jj >= 0 && jj < static_cast<long>(g.w)) out[jj] += in[oj];
          }
        }
      }
    }
  }
}

void add_channel_bias(double* y, const double* bias, std::size_t channels, std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] += bias[c];
  }
}

void reduce_channel_bias(const double* g, double* gb, std::size_t channels, std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += g[c * plane + i];
    gb[c] += acc;
  }
}

void check_bias(const Variable& bias, std::size_t channels, const char* op) {
  if (bias.defined() && bias.shape() != Shape{channels}) {
    throw ShapeError(std::string(op) + ": bias " + shape_str(bias.shape()) + " for " +
                     std::to_string(channels) + " output channels");
  }
}

}  // namespace

Variable conv2d(const Variable& input, const Variable& kernel, const Variable& bias,
                Conv2dOptions options) {
  require_rank(input, 4, "conv2d");
  require_rank(kernel, 4, "conv2d");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = options.stride;
  g.pad = options.padding;
  if (kernel.dim(1) != g.cin) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " for input " +
                     shape_str(input.shape()));
  }
  if (g.kh % 2 == 0 || g.kw % 2 == 0) {
    throw ConfigError("conv2d: kernel sizes must be odd, got " + shape_str(kernel.shape()));
  }
  if (g.stride == 0) throw ConfigError("conv2d: stride must be positive");
  const std::size_t span_h = g.h + 2 * g.pad;
  const std::size_t span_w = g.w + 2 * g.pad;
  if (span_h < g.kh || span_w < g.kw || (span_h - g.kh) % g.stride != 0 ||
      (span_w - g.kw) % g.stride != 0) {
    throw ConfigError("conv2d: non-integral output size for input " + shape_str(input.shape()) +
                      ", kernel " + shape_str(kernel.shape()) + ", stride " +
                      std::to_string(g.stride) + ", padding " + std::to_string(g.pad));
  }
  check_bias(bias, g.cout, "conv2d");
  g.ho = (span_h - g.kh) / g.stride + 1;
  g.wo = (span_w - g.kw) / g.stride + 1;

  const std::size_t plane = g.ho * g.wo;
  const std::size_t in_size = g.cin * g.h * g.w;
  Tensor y({g.batch, g.cout, g.ho, g.wo});
  std::vector<double> col(g.pointwise() ? 0 : g.patch() * plane);
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* x = input.value().raw() + b * in_size;
    const double* cols = x;
    if (!g.pointwise()) {
      im2col(g, x, col.data());
      cols = col.data();
    }
    double* out = y.raw() + b * g.cout * plane;
    gemm(false, false, g.cout, plane, g.patch(), kernel.value().raw(), cols, out, false);
    if (bias.defined()) add_channel_bias(out, bias.value().raw(), g.cout, plane);
  }
  return Variable::from_op(std::move(y), {input, kernel, bias}, [g](Node& self) {
    const std::size_t plane = g.ho * g.wo;
    const std::size_t in_size = g.cin * g.h * g.w;
    const bool need_x = self.input_requires_grad(0);
    const bool need_k = self.input_requires_grad(1);
    const bool need_b = self.input_requires_grad(2);
    std::vector<double> col(g.pointwise() ? 0 : g.patch() * plane);
    std::vector<double> gcol(need_x && !g.pointwise() ? g.patch() * plane : 0);
    for (std::size_t b = 0; b < g.batch; ++b) {
      const double* go = self.grad.raw() + b * g.cout * plane;
      if (need_b) reduce_channel_bias(go, self.input_grad(2).raw(), g.cout, plane);
      if (need_k) {
        const double* x = self.input_value(0).raw() + b * in_size;
        const double* cols = x;
        if (!g.pointwise()) {
          im2col(g, x, col.data());
          cols = col.data();
        }
        gemm(false, true, g.cout, g.patch(), plane, go, cols, self.input_grad(1).raw(), true);
      }
      if (need_x) {
        double* gx = self.input_grad(0).raw() + b * in_size;
        if (g.pointwise()) {
          gemm(true, false, g.cin, plane, g.cout, self.input_value(1).raw(), go, gx, true);
        } else {
          gemm(true, false, g.patch(), plane, g.cout, self.input_value(1).raw(), go,
               gcol.data(), false);
          col2im(g, gcol.data(), gx);
        }
      }
    }
  });
}

Variable upsample2x(const Variable& input, const Variable& kernel, const Variable& bias) {
  require_rank(input, 4, "upsample2x");
  require_rank(kernel, 4, "upsample2x");
  const std::size_t batch = input.dim(0);
  const std::size_t cin = input.dim(1);
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  if (kernel.dim(0) != cin || kernel.dim(2) != 2 || kernel.dim(3) != 2) {
    throw ShapeError("upsample2x: kernel " + shape_str(kernel.shape()) + " for input " +
                     shape_str(input.shape()) + " (expected [Cin, Cout, 2, 2])");
  }
  const std::size_t cout = kernel.dim(1);
  check_bias(bias, cout, "upsample2x");
  const std::size_t plane = h * w;
  const std::size_t rows = cout * 4;

  Tensor y({batch, cout, 2 * h, 2 * w});
  std::vector<double> cols(rows * plane);
  for (std::size_t b = 0; b < batch; ++b) {
    // cols[(co, di, dj), (i, j)] = sum_ci K[ci, (co, di, dj)] * x[ci, (i, j)]
    gemm(true, false, rows, plane, cin, kernel.value().raw(),
         input.value().raw() + b * cin * plane, cols.data(), false);
    double* out = y.raw() + b * cout * 4 * plane;
    for (std::size_t co = 0; co < cout; ++co) {
      const double bv = bias.defined() ? bias.value()[co] : 0.0;
      for (std::size_t di = 0; di < 2; ++di) {
        for (std::size_t dj = 0; dj < 2; ++dj) {
          const double* src = cols.data() + (co * 4 + di * 2 + dj) * plane;
          for (std::size_t i = 0; i < h; ++i) {
            double* dst = out + (co * 2 * h + 2 * i + di) * 2 * w + dj;
            for (std::size_t j = 0; j < w; ++j) dst[2 * j] = src[i * w + j] + bv;
          }
        }
      }
    }
  }
  return Variable::from_op(std::move(y), {input, kernel, bias}, [=](Node& self) {
    std::vector<double> gcols(rows * plane);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* go = self.grad.raw() + b * cout * 4 * plane;
      for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t di = 0; di < 2; ++di) {
          for (std::size_t dj = 0; dj < 2; ++dj) {
            double* dst = gcols.data() + (co * 4 + di * 2 + dj) * plane;
            for (std::size_t i = 0; i < h; ++i) {
              const double* src = go + (co * 2 * h + 2 * i + di) * 2 * w + dj;
              for (std::size_t j = 0; j < w; ++j) dst[i * w + j] = src[2 * j];
            }
          }
        }
      }
      if (self.input_requires_grad(2)) {
        reduce_channel_bias(go, self.input_grad(2).raw(), cout, 4 * plane);
      }
      if (self.input_requires_grad(0)) {
        gemm(false, false, cin, plane, rows, self.input_value(1).raw(), gcols.data(),
             self.input_grad(0).raw() + b * cin * plane, true);
      }
      if (self.input_requires_grad(1)) {
        gemm(false, true, cin, rows, plane, self.input_value(0).raw() + b * cin * plane,
             gcols.data(), self.input_grad(1).raw(), true);
      }
    }
  });
}

namespace {

struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> wlo, whi;
};

// Half-pixel source coordinates, clamped at the low edge.
AxisTaps bilinear_taps(std::size_t in, std::size_t out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.wlo.resize(out);
  t.whi.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = i0 + 1 < in ? i0 + 1 : i0;
    const double frac = src - static_cast<double>(i0);
    t.lo[o] = i0;
    t.hi[o] = i1;
    t.wlo[o] = 1.0 - frac;
    t.whi[o] = frac;
  }
  return t;
}

}  // namespace

Variable resize_bilinear(const Variable& input, std::size_t out_h, std::size_t out_w) {
  require_rank(input, 4, "resize_bilinear");
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: output size must be >= 1");
  const std::size_t nc = input.dim(0) * input.dim(1);
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  if (h == out_h && w == out_w) {
    return Variable::from_op(input.value(), {input}, [](Node& self) {
      accumulate(self.input_grad(0), self.grad);
    });
  }
  const AxisTaps ty = bilinear_taps(h, out_h);
  const AxisTaps tx = bilinear_taps(w, out_w);
  Tensor y({input.dim(0), input.dim(1), out_h, out_w});
  for (std::size_t p = 0; p < nc; ++p) {
    const double* src = input.value().raw() + p * h * w;
    double* dst = y.raw() + p * out_h * out_w;
    for (std::size_t oi = 0; oi < out_h; ++oi) {
      const double* r0 = src + ty.lo[oi] * w;
      const double* r1 = src + ty.hi[oi] * w;
      for (std::size_t oj = 0; oj < out_w; ++oj) {
        const double top = tx.wlo[oj] * r0[tx.lo[oj]] + tx.whi[oj] * r0[tx.hi[oj]];
        const double bot = tx.wlo[oj] * r1[tx.lo[oj]] + tx.whi[oj] * r1[tx.hi[oj]];
        dst[oi * out_w + oj] = ty.wlo[oi] * top + ty.whi[oi] * bot;
      }
    }
  }
  return Variable::from_op(std::move(y), {input}, [=](Node& self) {
    Tensor& gx = self.input_grad(0);
    for (std::size_t p = 0; p < nc; ++p) {
      const double* go = self.grad.raw() + p * out_h * out_w;
      double* dst = gx.raw() + p * h * w;
      for (std::size_t oi = 0; oi < out_h; ++oi) {
        double* r0 = dst + ty.lo[oi] * w;
        double* r1 = dst + ty.hi[oi] * w;
        for (std::size_t oj = 0; oj < out_w; ++oj) {
          const double g = go[oi * out_w + oj];
          const double top = ty.wlo[oi] * g;
          const double bot = ty.whi[oi] * g;
          r0[tx.lo[oj]] += tx.wlo[oj] * top;
          r0[tx.hi[oj]] += tx.whi[oj] * top;
          r1[tx.lo[oj]] += tx.wlo[oj] * bot;
          r1[tx.hi[oj]] += tx.whi[oj] * bot;
        }
      }
    }
  });
}

}  // namespace fseg::ops
