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

#ifndef M2FDP_MODEL_HPP_
#define M2FDP_MODEL_HPP_

#include <span>
#include <utility>
#include <vector>

#include "m2fdp/dataset.hpp"
#include "m2fdp/topology.hpp"
#include "m2fdp/vec.hpp"

namespace m2fdp {

enum class LossKind { kRidge, kLogistic, kHinge };

inline constexpr double kBetaFloor = 1e-6;

struct LossSpec {
  LossKind kind = LossKind::kLogistic;
  double lambda = 0.0;
  double clip_norm = 1.0;  // G
  double beta = 0.0;       // filled by EstimateBeta
};

// Model dimension M. Ridge and binary classifiers use one weight per
// feature; with more than two classes there is one weight row per class.
int ModelDim(const LossSpec& spec, int feature_dim, int num_classes);

// ℓ(d; w) including the (λ/2)‖w‖² term.
double PointLoss(const LossSpec& spec, std::span<const double> w,
                 std::span<const double> x, int label, int num_classes);
// grad += scale * ∇ℓ(d; w)
void AccumulatePointGradient(const LossSpec& spec, std::span<const double> w,
                             std::span<const double> x, int label,
                             int num_classes, double scale,
                             std::span<double> grad);

double LocalLoss(const LossSpec& spec, std::span<const double> w,
                 const FederatedDataset& dataset, int device);
// Full local gradient ∇F_j(w), unclipped.
Vec LocalGradient(const LossSpec& spec, std::span<const double> w,
                  const FederatedDataset& dataset, int device);

// F_{l,c}(w): ρ-weighted recursion over the subtree rooted at (l, c).
double IntermediateLoss(const LossSpec& spec, std::span<const double> w,
                        const FederatedDataset& dataset,
                        const TierTopology& topology, int layer, int node);
double GlobalLoss(const LossSpec& spec, std::span<const double> w,
                  const FederatedDataset& dataset, const TierTopology& topology);

// Product of 1/|S| along each device's path to the root.
std::vector<double> DeviceWeights(const TierTopology& topology);

Vec GlobalGradient(const LossSpec& spec, std::span<const double> w,
                   const FederatedDataset& dataset, const TierTopology& topology);

// Minibatch-mean gradient rescaled by min(1, G/‖g‖).
Vec StochasticGradient(const LossSpec& spec, std::span<const double> w,
                       const FederatedDataset& dataset, const Minibatch& batch);

// Clips g in place to norm at most G.
void ClipToNorm(std::span<double> g, double max_norm);

// max over consecutive pairs of ‖∇F(a) − ∇F(b)‖ / ‖a − b‖, floored at
// kBetaFloor. Pairs with identical iterates are skipped.
double EstimateBeta(const std::vector<std::pair<Vec, Vec>>& iterate_trace);

}  // namespace m2fdp

#endif  // M2FDP_MODEL_HPP_
