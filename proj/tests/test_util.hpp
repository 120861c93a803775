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

#ifndef M2FDP_TESTS_TEST_UTIL_HPP_
#define M2FDP_TESTS_TEST_UTIL_HPP_

#include <functional>
#include <memory>
#include <optional>

#include "m2fdp/dataset.hpp"
#include "m2fdp/engine.hpp"
#include "m2fdp/error.hpp"
#include "m2fdp/topology.hpp"

namespace m2fdp::testing {

// The library error code thrown by fn, if any.
inline std::optional<ErrorCode> CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline double RelErr(long double got, long double want) {
  if (want == 0) return static_cast<double>(got < 0 ? -got : got);
  const long double d = (got - want) / want;
  return static_cast<double>(d < 0 ? -d : d);
}

// A small logistic-regression run over `layers` with ratios applied below
// insecure parents.
inline TrainingSetup SmallSetup(const std::vector<int>& layers, const TrustAssignment& trust,
                                bool cloud_secure, Protocol protocol, int T, int K,
                                std::map<int, int> periods = {}, std::uint64_t seed = 1) {
  TrainingSetup s;
  s.seed = seed;
  s.protocol = protocol;
  s.topology = std::make_shared<const TierTopology>(BuildTopology(layers, trust, cloud_secure));
  s.dataset = std::make_shared<const FederatedDataset>(
      GenerateSynthetic(layers.back(), 20, 4, 2, 0.5, seed));
  s.loss = {LossKind::kLogistic, 0.1, 1.0};
  s.dp.epsilon = 1.0;
  s.dp.delta = 1e-5;
  s.dp.q = 0.2;
  s.dp.T = T;
  s.schedule = BuildSchedule(T, {K}, periods);
  return s;
}

inline TrustAssignment Ratios(const std::vector<int>& layers, const std::vector<double>& r,
                              bool cloud_secure = false) {
  return TrustFromRatios(layers, r, cloud_secure);
}

}  // namespace m2fdp::testing

#endif  // M2FDP_TESTS_TEST_UTIL_HPP_
