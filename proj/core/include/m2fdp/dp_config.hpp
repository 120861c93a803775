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

#ifndef M2FDP_DP_CONFIG_HPP_
#define M2FDP_DP_CONFIG_HPP_

#include <vector>

namespace m2fdp {

// Privacy budget and accountant constants shared by calibration and the
// bound evaluators.
struct DPConfig {
  double epsilon = 1.0;
  double delta = 1e-5;
  double q = 0.1;  // per-point sampling ratio
  int T = 1;       // number of global aggregations
  // alphas[l - 1] is the accountant constant for layer l in [1, L]. An empty
  // vector means 1 everywhere.
  std::vector<double> alphas;
  double c1 = 1.0;

  double alpha(int layer) const {
    return alphas.empty() ? 1.0 : alphas.at(layer - 1);
  }

  // Throws kInvalidArgument on out-of-range fields and
  // kAccountantPremiseViolated unless ε < c1·q·T.
  void Validate() const;
};

}  // namespace m2fdp

#endif  // M2FDP_DP_CONFIG_HPP_
