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

#include "fseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fseg/error.hpp"

namespace fseg {

namespace {

double eval_loss(const std::function<Variable()>& loss) {
  const double v = loss().value().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: loss evaluated to a non-finite value");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Variable()>& loss,
                           const std::vector<Variable>& params, double eps) {
  std::vector<Variable> ps = params;
  for (Variable& p : ps) p.zero_grad();
  Variable out = loss();
  if (!std::isfinite(out.value().item())) {
    throw NumericError("grad_check: loss evaluated to a non-finite value");
  }
  out.backward();
  out = Variable();

  GradCheckResult result;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    const Tensor analytic = ps[pi].grad();
    Tensor& value = ps[pi].mutable_value();
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double up = eval_loss(loss);
      value[i] = saved - eps;
      const double down = eval_loss(loss);
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > result.max_rel_error || (pi == 0 && i == 0)) {
        result = {err, pi, i, a, numeric};
      }
    }
  }
  return result;
}

}  // namespace fseg
