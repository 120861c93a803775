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

#include "m2fdp/analysis.hpp"

#include <cmath>
#include <string>

#include "m2fdp/error.hpp"

namespace m2fdp {

namespace {

using Real = long double;

struct Products {
  const TrustStats& stats;

  // Π_{l=a}^{b} s_l, empty product 1.
  Real Fanout(int a, int b) const {
    Real p = 1;
    for (int l = a; l <= b; ++l) p *= stats.min_fanout[l];
    return p;
  }
  Real FanoutSq(int a, int b) const {
    const Real p = Fanout(a, b);
    return p * p;
  }
  // Π_{l=a}^{b} (1 − p_l^min)
  Real Insecure(int a, int b) const {
    Real p = 1;
    for (int l = a; l <= b; ++l) p *= 1 - static_cast<Real>(stats.p_min[l]);
    return p;
  }
};

Real Alpha(std::span<const double> alphas, int layer) {
  return alphas.empty() ? 1.0L : static_cast<Real>(alphas[layer - 1]);
}

void CheckAlphas(std::span<const double> alphas, int L) {
  if (!alphas.empty() && static_cast<int>(alphas.size()) != L) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected " + std::to_string(L) + " alphas, got " +
                    std::to_string(alphas.size()));
  }
}

}  // namespace

std::vector<LayerTerms> AbcTerms(const TrustStats& stats,
                                 std::span<const double> alphas) {
  const int L = stats.num_layers;
  CheckAlphas(alphas, L);
  const Products pr{stats};
  const Real alpha_L = Alpha(alphas, L);
  std::vector<LayerTerms> out(L);
  for (int l = 1; l <= L; ++l) {
    LayerTerms& t = out[l - 1];
    const Real al = Alpha(alphas, l);
    t.a = stats.p_max[l] * al * al / pr.FanoutSq(l, L - 1);
    for (int m = l; m <= L - 1; ++m) {
      const Real am = Alpha(alphas, m);
      t.b += pr.Insecure(l, m - 1) * stats.p_max[m] * am * am /
             (pr.Fanout(l, m - 1) * pr.FanoutSq(m, L - 1));
    }
    t.c = pr.Insecure(l, L - 1) * alpha_L * alpha_L / pr.Fanout(l, L - 1);
  }
  return out;
}

long double GapPrefactor(const DPConfig& dp, int num_layers, int model_dim,
                         int k_max) {
  const Real K = k_max;
  const Real q = dp.q;
  const Real eps = dp.epsilon;
  return 8.0L * num_layers * model_dim * K * K * K * K * q * q *
         std::log(1.0L / static_cast<Real>(dp.delta)) / (eps * eps);
}

long double StationarityGap(const DPConfig& dp, int model_dim, int k_max,
                            const std::vector<LayerTerms>& terms,
                            const TrustStats& stats) {
  const int L = stats.num_layers;
  Real sum = 0;
  for (int l = 1; l <= L; ++l) {
    const Real w = 1 - static_cast<Real>(stats.p_min[l - 1]);
    sum += w * w * terms.at(l - 1).sum();
  }
  return GapPrefactor(dp, L, model_dim, k_max) * sum;
}

double MaxStepSize(double beta, int k_max, int T) {
  if (!(beta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "beta must be positive");
  return std::min(1.0 / k_max, 1.0 / T) / beta;
}

double EtaSchedule(double gamma, int t) { return gamma / std::sqrt(t + 1.0); }

Theorem1Terms Theorem1Bound(const LossConstants& loss, double loss_drop, int T,
                            int k_max, long double gap,
                            std::optional<double> gamma) {
  if (gamma) {
    const double limit = MaxStepSize(loss.beta, k_max, T);
    if (*gamma > limit * (1.0 + 1e-12)) {
      throw Error(ErrorCode::kInadmissibleStepSize,
                  "gamma " + std::to_string(*gamma) + " exceeds " +
                      std::to_string(limit));
    }
  }
  const Real beta = loss.beta;
  const Real G2 = static_cast<Real>(loss.G) * loss.G;
  Theorem1Terms out;
  out.a1 = 2 * beta / std::sqrt(static_cast<Real>(T) + 1) * loss_drop;
  out.a2 = k_max * (G2 * (1 + 1 / beta) + loss.sigma2) / T;
  out.gap = gap;
  return out;
}

Corollary1Result Corollary1Bound(int m, const TrustStats& stats,
                                 std::span<const double> alphas,
                                 std::span<const double> alpha_primes,
                                 const DPConfig& dp, int model_dim, int k_max) {
  const int L = stats.num_layers;
  CheckAlphas(alphas, L);
  CheckAlphas(alpha_primes, L);
  if (alpha_primes.empty()) alpha_primes = alphas;
  if (m < 0 || m > L - 1) {
    throw Error(ErrorCode::kPreconditionViolated,
                "lowest insecure layer must lie in [0, L-1]");
  }
  for (int l = m + 1; l <= L; ++l) {
    if (stats.p_min[l] != 1.0 || stats.p_max[l] != 1.0) {
      throw Error(ErrorCode::kPreconditionViolated,
                  "layer " + std::to_string(l) + " is not fully secure");
    }
  }
  const Products pr{stats};
  const Real P = GapPrefactor(dp, L, model_dim, k_max);

  auto c_summand = [&](int l, int lowest) {
    const Real w = 1 - static_cast<Real>(stats.p_min[l - 1]);
    const Real ap = Alpha(alpha_primes, l);
    return w * w * (1 - static_cast<Real>(stats.p_min[l])) * ap * ap /
           (pr.Fanout(l, lowest) * pr.FanoutSq(lowest + 1, L - 1));
  };

  Corollary1Result out;
  out.m = m;
  Real b = 0;
  Real c = 0;
  for (int l = 1; l <= m; ++l) {
    const Real w = 1 - static_cast<Real>(stats.p_min[l - 1]);
    const Real al = Alpha(alphas, l);
    b += w * w * stats.p_max[l] * al * al / pr.FanoutSq(l, L - 1);
    c += c_summand(l, m);
  }
  out.term_b = P * b;
  out.term_c = P * c;

  if (m >= 2) {
    Real num = 0;
    Real den = 0;
    for (int l = 1; l <= m - 1; ++l) {
      num += c_summand(l, m);
      den += c_summand(l, m - 1);
    }
    if (den > 0) out.ratio = num / den;
  }
  return out;
}

BoundReport MakeBoundReport(const TrustStats& stats, const DPConfig& dp,
                            int model_dim, int k_max, const LossConstants& loss,
                            double loss_drop) {
  BoundReport r;
  r.num_layers = stats.num_layers;
  r.model_dim = model_dim;
  r.k_max = k_max;
  r.dp = dp;
  r.loss = loss;
  r.loss_drop = loss_drop;
  r.stats = stats;
  for (int l = 1; l <= stats.num_layers; ++l) r.alphas.push_back(dp.alpha(l));
  r.terms = AbcTerms(stats, r.alphas);
  r.prefactor = GapPrefactor(dp, stats.num_layers, model_dim, k_max);
  for (int l = 1; l <= stats.num_layers; ++l) {
    const long double w = 1 - static_cast<long double>(stats.p_min[l - 1]);
    r.weighted_sum += w * w * r.terms[l - 1].sum();
  }
  r.gap = StationarityGap(dp, model_dim, k_max, r.terms, stats);
  r.theorem1 = Theorem1Bound(loss, loss_drop, dp.T, k_max, r.gap);
  r.gamma_max = MaxStepSize(loss.beta, k_max, dp.T);
  return r;
}

}  // namespace m2fdp
