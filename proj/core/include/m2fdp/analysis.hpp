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

#ifndef M2FDP_ANALYSIS_HPP_
#define M2FDP_ANALYSIS_HPP_

#include <optional>
#include <span>
#include <vector>

#include "m2fdp/dp_config.hpp"
#include "m2fdp/topology.hpp"

namespace m2fdp {

// Per-layer noise terms of the stationarity gap. Everything here is
// evaluated in long double; products of many fanouts shrink quickly.
struct LayerTerms {
  long double a = 0;
  long double b = 0;
  long double c = 0;
  long double sum() const { return a + b + c; }
};

// Returns terms for layers 1..L at index l-1. `alphas` follows the
// DPConfig convention (alphas[l-1] for layer l; empty means all ones).
// Empty products are 1 and empty sums are 0. The m = l summand of B is
// kept, so B_l contains a copy of A_l.
std::vector<LayerTerms> AbcTerms(const TrustStats& stats,
                                 std::span<const double> alphas);

// 8 L M K^4 q² ln(1/δ) / ε²
long double GapPrefactor(const DPConfig& dp, int num_layers, int model_dim,
                         int k_max);

// Prefactor times Σ_l (1 − p_{l−1}^min)² (A_l + B_l + C_l).
long double StationarityGap(const DPConfig& dp, int model_dim, int k_max,
                            const std::vector<LayerTerms>& terms,
                            const TrustStats& stats);

struct LossConstants {
  double beta = 1.0;
  double G = 1.0;
  double sigma2 = 0.0;  // stochastic-gradient variance
};

// γ* = min(1/K_max, 1/T) / β
double MaxStepSize(double beta, int k_max, int T);
// η^t = γ / √(t + 1)
double EtaSchedule(double gamma, int t);

struct Theorem1Terms {
  long double a1 = 0;
  long double a2 = 0;
  long double gap = 0;
  long double total() const { return a1 + a2 + gap; }
};

// a1 = 2β/√(T+1)·loss_drop, a2 = K_max(G²(1+1/β)+σ²)/T. When gamma is
// given it must not exceed MaxStepSize (kInadmissibleStepSize).
Theorem1Terms Theorem1Bound(const LossConstants& loss, double loss_drop, int T,
                            int k_max, long double gap,
                            std::optional<double> gamma = std::nullopt);

struct Corollary1Result {
  int m = 0;
  long double term_b = 0;  // the p^max α² / Π s² sum over l ≤ m
  long double term_c = 0;  // the (1 − p^min) α'² sum over l ≤ m
  long double gap() const { return term_b + term_c; }
  // term_c(m) / term_c(m−1) over the summands both share (l ≤ m−1).
  // Empty when m ≤ 1 or the shared part vanishes.
  std::optional<long double> ratio;
};

// `m` is the lowest layer holding an insecure intermediate node (0 when
// even the cloud is trusted). Requires p^min = p^max = 1 on layers m+1..L.
// alpha_primes defaults to alphas when empty.
Corollary1Result Corollary1Bound(int m, const TrustStats& stats,
                                 std::span<const double> alphas,
                                 std::span<const double> alpha_primes,
                                 const DPConfig& dp, int model_dim, int k_max);

struct BoundReport {
  int num_layers = 0;
  int model_dim = 0;
  int k_max = 0;
  DPConfig dp;
  LossConstants loss;
  double loss_drop = 0;
  TrustStats stats;
  std::vector<double> alphas;  // resolved, one per layer
  std::vector<LayerTerms> terms;
  long double prefactor = 0;
  long double weighted_sum = 0;
  long double gap = 0;
  Theorem1Terms theorem1;
  double gamma_max = 0;
};

BoundReport MakeBoundReport(const TrustStats& stats, const DPConfig& dp,
                            int model_dim, int k_max, const LossConstants& loss,
                            double loss_drop);

}  // namespace m2fdp

#endif  // M2FDP_ANALYSIS_HPP_
