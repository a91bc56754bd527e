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

#include "gemm.hpp"

#include <Eigen/Core>

#include <algorithm>

namespace fseg::detail {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Stride = Eigen::OuterStride<>;
using ConstMap = Eigen::Map<const RowMat, 0, Stride>;
using Map = Eigen::Map<RowMat, 0, Stride>;

// Always the packed GEBP kernel: its packing buffers are aligned, so the
// arithmetic is independent of operand alignment, unlike the coefficient
// based and GEMV paths Eigen picks for small or thin products.
template <typename L, typename R>
void packed_product(Map& dst, const L& lhs, const R& rhs) {
  Eigen::internal::generic_product_impl<L, R, Eigen::DenseShape, Eigen::DenseShape,
                                        Eigen::GemmProduct>::scaleAndAddTo(dst, lhs, rhs, 1.0);
}

}  // namespace

void gemm_strided(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
  }
  if (m == 0 || n == 0 || k == 0) return;

  if (m == 1 || n == 1) {
    auto at_a = [&](std::size_t i, std::size_t p) { return trans_a ? a[p * lda + i] : a[i * lda + p]; };
    auto at_b = [&](std::size_t p, std::size_t j) { return trans_b ? b[j * ldb + p] : b[p * ldb + j]; };
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * ldc;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = at_a(i, p);
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * at_b(p, j);
      }
    }
    return;
  }

  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  Map dst(c, M, N, Stride(static_cast<Eigen::Index>(ldc)));
  const Stride sa(static_cast<Eigen::Index>(lda)), sb(static_cast<Eigen::Index>(ldb));
  if (!trans_a && !trans_b) {
    packed_product(dst, ConstMap(a, M, K, sa), ConstMap(b, K, N, sb));
  } else if (trans_a && !trans_b) {
    packed_product(dst, ConstMap(a, K, M, sa).transpose(), ConstMap(b, K, N, sb));
  } else if (!trans_a && trans_b) {
    packed_product(dst, ConstMap(a, M, K, sa), ConstMap(b, N, K, sb).transpose());
  } else {
    packed_product(dst, ConstMap(a, K, M, sa).transpose(), ConstMap(b, N, K, sb).transpose());
  }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  gemm_strided(trans_a, trans_b, m, n, k, a, trans_a ? m : k, b, trans_b ? k : n, c, n,
               accumulate);
}

}  // namespace fseg::detail
