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

#ifndef M2FDP_CONTROL_HPP_
#define M2FDP_CONTROL_HPP_

#include <span>
#include <vector>

#include "m2fdp/dp_config.hpp"
#include "m2fdp/topology.hpp"

namespace m2fdp {

// W = 10^(dBm/10) / 1000
double DbmToWatts(double dbm);

// Fixed-rate link model. "Device" links cover every wireless hop below the
// cloud; "cloud" links are the wired uplinks of layer-1 nodes.
struct CostModel {
  double device_power_w = 0.25118864315095801;  // 24 dBm
  double cloud_power_w = 6.3095734448019325;    // 38 dBm
  double device_rate_bps = 35e6;
  double cloud_rate_bps = 100e6;
  double bits_per_param = 32;
  int model_dim = 7840;
  double e_iter = 1e-3;      // J per local update per device
  double gamma_iter = 0.2;   // s per local iteration

  double DeviceLinkDelay() const { return model_dim * bits_per_param / device_rate_bps; }
  double CloudLinkDelay() const { return model_dim * bits_per_param / cloud_rate_bps; }
  double DeviceLinkEnergy() const { return device_power_w * DeviceLinkDelay(); }
  double CloudLinkEnergy() const { return cloud_power_w * CloudLinkDelay(); }

  void Validate() const;
};

struct ObjectiveWeights {
  double energy = 1.0;
  double delay = 1.0;
  double gap = 1.0;
};

// τ^t and the number of local aggregation events per round.
struct ControlContext {
  int tau = 1;
  double local_events = 0;
};

// `s` holds one participation size per layer-(L-1) node.
double EnergyObjective(int K, std::span<const int> s, const CostModel& cost,
                       const TierTopology& topology, const ControlContext& ctx);
double DelayObjective(int K, std::span<const int> s, const CostModel& cost,
                      const TierTopology& topology, const ControlContext& ctx);
// ν with the device-layer fanout replaced by sampled sizes: the smallest
// secure-class size in A and B, the smallest insecure-class size in C.
double GapObjective(int K, std::span<const int> s, const DPConfig& dp,
                    const TierTopology& topology, const TrustStats& stats,
                    int model_dim);

// true when the layer-1 ancestor of layer-(L-1) node c is secure (for L = 1,
// when the cloud is).
bool SubnetSecureClass(const TierTopology& topology, int subnet);

// min(1/K_prev, 1/τ) / β
double TuneGamma(double beta, int k_prev, int tau);

struct ControlProblem {
  ObjectiveWeights weights;
  CostModel cost;
  DPConfig dp;
  const TierTopology* topology = nullptr;
  TrustStats stats;
  int model_dim = 1;
  int k_max = 1;
  ControlContext ctx;
};

struct ControlDecision {
  int K = 1;
  int s_secure = 0;  // 0 when the class has no subnet
  int s_insecure = 0;
  std::vector<int> s;  // per layer-(L-1) node
  double objective = 0;
  double energy = 0;
  double delay = 0;
  double nu = 0;
};

double Objective(const ControlProblem& p, int K, std::span<const int> s,
                 ControlDecision* breakdown = nullptr);

// Exhaustive search over K × s_secure × s_insecure. Ties go to smaller K,
// then smaller s_secure, then smaller s_insecure.
ControlDecision SolveControl(const ControlProblem& problem);

// Search over every per-subnet participation vector. Refuses more than 1e7
// grid points.
ControlDecision BruteForceControl(const ControlProblem& problem);

struct SweepRow {
  ObjectiveWeights weights;
  double e_iter = 0;
  ControlDecision decision;
};

// One decision per weight vector and per E_iter value (the problem's own
// E_iter when `e_iters` is empty).
std::vector<SweepRow> ControlSweep(const ControlProblem& base,
                                   const std::vector<ObjectiveWeights>& grid,
                                   const std::vector<double>& e_iters = {});

}  // namespace m2fdp

#endif  // M2FDP_CONTROL_HPP_
