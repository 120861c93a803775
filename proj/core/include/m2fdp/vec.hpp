// Copyright 2026 The M2FDP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef M2FDP_VEC_HPP_
#define M2FDP_VEC_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace m2fdp {

using Vec = std::vector<double>;

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double Norm(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

// y += a * x
inline void Axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void Scale(double a, std::span<double> x) {
  for (double& v : x) v *= a;
}

inline Vec Sub(std::span<const double> a, std::span<const double> b) {
  Vec out(a.begin(), a.end());
  for (std::size_t i = 0; i < b.size(); ++i) out[i] -= b[i];
  return out;
}

}  // namespace m2fdp

#endif  // M2FDP_VEC_HPP_
