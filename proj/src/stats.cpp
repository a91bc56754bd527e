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

#include "fseg/stats.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>

#include "fseg/error.hpp"

namespace fseg {

namespace {

struct Moments {
  double n, mean, var;
};

Moments moments(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {n, mean, ss / (n - 1.0)};
}

}  // namespace

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ContractError("welch_t_test: each sample needs at least two values");
  }
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double sa = ma.var / ma.n;
  const double sb = mb.var / mb.n;
  const double se2 = sa + sb;
  if (!(se2 > 0.0)) throw NumericError("welch_t_test: both samples have zero variance");
  WelchResult r;
  r.t = (ma.mean - mb.mean) / std::sqrt(se2);
  r.df = se2 * se2 / (sa * sa / (ma.n - 1.0) + sb * sb / (mb.n - 1.0));
  r.p = boost::math::ibeta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t));
  return r;
}

}  // namespace fseg
