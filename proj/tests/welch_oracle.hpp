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

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace fseg::testing {

// Two-sided p from numerical integration of the Student-t density.
struct WelchOracle {
  double t, df, p;
};

inline WelchOracle welch_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& x) {
    long double m = 0;
    for (double v : x) m += v;
    m /= x.size();
    long double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::pair<long double, long double>{m, s / (x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const long double qa = va / a.size(), qb = vb / b.size();
  const long double t = (ma - mb) / std::sqrt(qa + qb);
  const long double df =
      (qa + qb) * (qa + qb) / (qa * qa / (a.size() - 1) + qb * qb / (b.size() - 1));
  const long double logc = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) -
                           0.5L * std::log(df * 3.14159265358979323846264338327950288L);
  auto density = [&](long double x) {
    return std::exp(logc - (df + 1) / 2 * std::log1p(x * x / df));
  };
  using boost::math::quadrature::gauss_kronrod;
  const long double tail = gauss_kronrod<long double, 61>::integrate(
      density, std::fabs(t), std::numeric_limits<long double>::infinity(), 20, 1e-18L);
  return {static_cast<double>(t), static_cast<double>(df), static_cast<double>(2 * tail)};
}

}  // namespace fseg::testing
