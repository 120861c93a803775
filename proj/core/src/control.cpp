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

#include "m2fdp/control.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "m2fdp/analysis.hpp"
#include "m2fdp/error.hpp"

namespace m2fdp {

double DbmToWatts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

void CostModel::Validate() const {
  const bool ok = device_power_w > 0 && cloud_power_w > 0 && device_rate_bps > 0 &&
                  cloud_rate_bps > 0 && bits_per_param > 0 && model_dim > 0 &&
                  e_iter > 0 && gamma_iter > 0;
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "cost model entries must be positive");
}

namespace {

void CheckRates(std::span<const int> s, const TierTopology& topology) {
  const int sub = topology.num_layers() - 1;
  if (static_cast<int>(s.size()) != topology.layer_size(sub)) {
    throw Error(ErrorCode::kRateOutOfRange,
                "need one participation size per subnet");
  }
  for (int c = 0; c < topology.layer_size(sub); ++c) {
    const int n = static_cast<int>(topology.children(sub, c).size());
    if (s[c] < 1 || s[c] > n) {
      throw Error(ErrorCode::kRateOutOfRange,
                  "subnet " + std::to_string(c) + " participation " +
                      std::to_string(s[c]) + " outside [1, " + std::to_string(n) + "]");
    }
  }
}

void CheckK(int K) {
  if (K < 1) throw Error(ErrorCode::kInvalidArgument, "K must be at least 1");
}

// Nodes strictly between layer 1 and the subnet layer; each forwards one
// model per local aggregation.
int RelayNodes(const TierTopology& topology) {
  int n = 0;
  for (int l = 2; l <= topology.num_layers() - 1; ++l) n += topology.layer_size(l);
  return n;
}

}  // namespace

double EnergyObjective(int K, std::span<const int> s, const CostModel& cost,
                       const TierTopology& topology, const ControlContext& ctx) {
  CheckK(K);
  CheckRates(s, topology);
  const int L = topology.num_layers();
  double total_s = 0;
  for (int v : s) total_s += v;
  double global = 0;
  double local = 0;
  if (L == 1) {
    global = total_s * cost.DeviceLinkEnergy();
  } else {
    global = topology.layer_size(1) * cost.CloudLinkEnergy();
    local = (total_s + RelayNodes(topology)) * cost.DeviceLinkEnergy();
  }
  const double scale = static_cast<double>(ctx.tau) / K;
  return scale * global + scale * (ctx.local_events * local + K * total_s * cost.e_iter);
}

double DelayObjective(int K, std::span<const int> s, const CostModel& cost,
                      const TierTopology& topology, const ControlContext& ctx) {
  CheckK(K);
  CheckRates(s, topology);
  const int L = topology.num_layers();
  double global = 0;
  double local = 0;
  if (L == 1) {
    global = cost.DeviceLinkDelay();
  } else {
    global = cost.CloudLinkDelay();
    local = topology.layer_size(1) * (L - 1) * cost.DeviceLinkDelay();
  }
  const double scale = static_cast<double>(ctx.tau) / K;
  return scale * (global + ctx.local_events * local + K * cost.gamma_iter);
}

bool SubnetSecureClass(const TierTopology& topology, int subnet) {
  const int sub = topology.num_layers() - 1;
  if (sub == 0) return topology.cloud_secure();
  return topology.is_secure(1, topology.AncestorAt(sub, subnet, 1));
}

double GapObjective(int K, std::span<const int> s, const DPConfig& dp,
                    const TierTopology& topology, const TrustStats& stats,
                    int model_dim) {
  CheckK(K);
  CheckRates(s, topology);
  int min_all = 0;
  int min_secure = 0;
  int min_insecure = 0;
  for (std::size_t c = 0; c < s.size(); ++c) {
    min_all = c == 0 ? s[c] : std::min(min_all, s[c]);
    int& slot = SubnetSecureClass(topology, static_cast<int>(c)) ? min_secure : min_insecure;
    slot = slot == 0 ? s[c] : std::min(slot, s[c]);
  }
  if (min_secure == 0) min_secure = min_all;
  if (min_insecure == 0) min_insecure = min_all;

  std::vector<double> alphas;
  for (int l = 1; l <= stats.num_layers; ++l) alphas.push_back(dp.alpha(l));
  const auto ab = AbcTerms(stats.WithDeviceFanout(min_secure), alphas);
  const auto c = AbcTerms(stats.WithDeviceFanout(min_insecure), alphas);
  std::vector<LayerTerms> mixed(ab.size());
  for (std::size_t i = 0; i < ab.size(); ++i) mixed[i] = {ab[i].a, ab[i].b, c[i].c};
  return static_cast<double>(StationarityGap(dp, model_dim, K, mixed, stats));
}

double TuneGamma(double beta, int k_prev, int tau) {
  if (!(beta > 0) || k_prev < 1 || tau < 1) {
    throw Error(ErrorCode::kInvalidArgument, "tune_gamma needs positive inputs");
  }
  return std::min(1.0 / k_prev, 1.0 / tau) / beta;
}

double Objective(const ControlProblem& p, int K, std::span<const int> s,
                 ControlDecision* breakdown) {
  const double e = EnergyObjective(K, s, p.cost, *p.topology, p.ctx);
  const double d = DelayObjective(K, s, p.cost, *p.topology, p.ctx);
  const double nu = GapObjective(K, s, p.dp, *p.topology, p.stats, p.model_dim);
  const double value = p.weights.energy * e + p.weights.delay * d + p.weights.gap * nu;
  if (breakdown) {
    breakdown->energy = e;
    breakdown->delay = d;
    breakdown->nu = nu;
    breakdown->objective = value;
  }
  return value;
}

namespace {

struct Bounds {
  int k_hi = 1;
  std::vector<int> sizes;
  std::vector<bool> secure;
  int secure_max = 0;
  int insecure_max = 0;
};

Bounds Feasible(const ControlProblem& p) {
  if (!p.topology) throw Error(ErrorCode::kInvalidArgument, "control problem has no topology");
  const auto& w = p.weights;
  if (w.energy < 0 || w.delay < 0 || w.gap < 0 ||
      (w.energy == 0 && w.delay == 0 && w.gap == 0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "objective weights must be non-negative and not all zero");
  }
  if (p.k_max < 1 || p.ctx.tau < 1) {
    throw Error(ErrorCode::kInfeasibleConstraints, "need K_max >= 1 and tau >= 1");
  }
  Bounds b;
  b.k_hi = std::min(p.k_max, p.ctx.tau);
  const auto& topo = *p.topology;
  const int sub = topo.num_layers() - 1;
  for (int c = 0; c < topo.layer_size(sub); ++c) {
    const int n = static_cast<int>(topo.children(sub, c).size());
    if (n < 1) throw Error(ErrorCode::kInfeasibleConstraints, "empty subnet");
    const bool sec = SubnetSecureClass(topo, c);
    b.sizes.push_back(n);
    b.secure.push_back(sec);
    int& slot = sec ? b.secure_max : b.insecure_max;
    slot = std::max(slot, n);
  }
  return b;
}

void FillClassSizes(const Bounds& b, ControlDecision& d) {
  d.s_secure = 0;
  d.s_insecure = 0;
  for (std::size_t c = 0; c < d.s.size(); ++c) {
    int& slot = b.secure[c] ? d.s_secure : d.s_insecure;
    slot = slot == 0 ? d.s[c] : std::min(slot, d.s[c]);
  }
}

}  // namespace

ControlDecision SolveControl(const ControlProblem& problem) {
  const Bounds b = Feasible(problem);
  ControlDecision best;
  bool have = false;
  std::vector<int> s(b.sizes.size());
  for (int K = 1; K <= b.k_hi; ++K) {
    for (int ss = 1; ss <= std::max(b.secure_max, 1); ++ss) {
      for (int si = 1; si <= std::max(b.insecure_max, 1); ++si) {
        for (std::size_t c = 0; c < s.size(); ++c) {
          s[c] = std::min(b.secure[c] ? ss : si, b.sizes[c]);
        }
        ControlDecision cand;
        Objective(problem, K, s, &cand);
        if (!have || cand.objective < best.objective) {
          cand.K = K;
          cand.s = s;
          best = cand;
          have = true;
        }
      }
    }
  }
  FillClassSizes(b, best);
  return best;
}

ControlDecision BruteForceControl(const ControlProblem& problem) {
  const Bounds b = Feasible(problem);
  double points = b.k_hi;
  for (int n : b.sizes) points *= n;
  if (points > 1e7) {
    throw Error(ErrorCode::kSearchSpaceTooLarge,
                "brute-force space has " + std::to_string(points) + " points");
  }
  ControlDecision best;
  bool have = false;
  for (int K = 1; K <= b.k_hi; ++K) {
    std::vector<int> s(b.sizes.size(), 1);
    while (true) {
      ControlDecision cand;
      Objective(problem, K, s, &cand);
      if (!have || cand.objective < best.objective) {
        cand.K = K;
        cand.s = s;
        best = cand;
        have = true;
      }
      // Odometer increment, last subnet fastest.
      int pos = static_cast<int>(s.size()) - 1;
      while (pos >= 0 && s[pos] == b.sizes[pos]) s[pos--] = 1;
      if (pos < 0) break;
      ++s[pos];
    }
  }
  FillClassSizes(b, best);
  return best;
}

std::vector<SweepRow> ControlSweep(const ControlProblem& base,
                                   const std::vector<ObjectiveWeights>& grid,
                                   const std::vector<double>& e_iters) {
  std::vector<double> energies = e_iters;
  if (energies.empty()) energies.push_back(base.cost.e_iter);
  std::vector<SweepRow> rows;
  for (double e : energies) {
    for (const auto& w : grid) {
      ControlProblem p = base;
      p.weights = w;
      p.cost.e_iter = e;
      rows.push_back({w, e, SolveControl(p)});
    }
  }
  return rows;
}

}  // namespace m2fdp
