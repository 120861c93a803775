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

#ifndef M2FDP_ENGINE_HPP_
#define M2FDP_ENGINE_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "m2fdp/control.hpp"
#include "m2fdp/dataset.hpp"
#include "m2fdp/dp_config.hpp"
#include "m2fdp/model.hpp"
#include "m2fdp/privacy.hpp"
#include "m2fdp/topology.hpp"
#include "m2fdp/vec.hpp"

namespace m2fdp {

enum class Protocol { kM2fdp, kHflNoDp, kHflDpLdp, kPedpflStar };

std::string_view ProtocolName(Protocol p);
std::optional<Protocol> ParseProtocol(std::string_view name);

// Where fresh noise is drawn when a child reports to its parent.
enum class NoisePolicy {
  kTrustAware,  // parent insecure and child secure (or a device)
  kDeviceOnly,  // every device, regardless of trust
  kNone,
};

// Local-aggregation iterations per round and layer. Sets come either from a
// period (every p-th iteration) or from an explicit list; either way they
// are clipped to [1, K^t].
class TrainingSchedule {
 public:
  int T = 1;
  std::vector<int> K;  // K^t for t = 1..T, index t-1
  int k_max = 1;
  std::map<int, int> periods;
  std::map<int, std::vector<int>> sets;

  std::vector<int> Set(int t, int layer) const;
  // The layer aggregating at iteration k of round t, or 0 for none.
  int LayerAt(int t, int k) const;
  int LocalEvents(int t) const;
};

// K may hold one value (constant) or one per round.
TrainingSchedule BuildSchedule(int T, const std::vector<int>& K,
                               const std::map<int, int>& periods,
                               const std::map<int, std::vector<int>>& sets = {});

struct RoundState {
  int t = 1;
  Vec global;
  std::vector<Vec> device;
  // node[l][c]: last aggregate at node c of layer l, l in [0, L-1].
  std::vector<std::vector<Vec>> node;
  // Participating devices per layer-(L-1) node, ascending ids.
  std::vector<std::vector<int>> participants;
};

RoundState InitialState(const TierTopology& topology, const Vec& w0);

// Called once per node aggregation, in execution order.
using AggregationObserver = std::function<void(int layer, int node)>;

struct NoiseContext {
  NoisePolicy policy = NoisePolicy::kNone;
  DPConfig dp;
  double eta = 0;
  int k_cal = 1;
  double clip_norm = 1;
  TrustStats stats;  // with the sampled device fanout applied
  std::uint64_t seed = 0;
  NoiseLedger* ledger = nullptr;
};

// w_j ← w_j − η g
void LocalSgdStep(RoundState& state, int device, double eta, std::span<const double> g);

// Aggregates layers L-1 down to `layer` at iteration k and broadcasts the
// layer aggregates to their devices. Fails with kScheduleViolation unless
// k is in the layer's set for the current round.
void LocalAggregate(RoundState& state, const TierTopology& topology,
                    const TrainingSchedule& schedule, int layer, int k,
                    const NoiseContext& noise,
                    const AggregationObserver& observer = nullptr);

// Full bottom-up pass to the cloud at k = K^t + 1, then broadcast.
void GlobalAggregate(RoundState& state, const TierTopology& topology, int k,
                     const NoiseContext& noise,
                     const AggregationObserver& observer = nullptr);

// Uniform sample without replacement of rates[c] devices from each
// layer-(L-1) subnet; returned ids are ascending.
std::vector<std::vector<int>> SampleParticipants(const TierTopology& topology,
                                                 std::span<const int> rates,
                                                 RngStream& rng);

enum class StepKind { kDecay, kConstant };

struct ControlSettings {
  bool enabled = false;
  ObjectiveWeights weights;
  int tau = 0;
  int k_max = 0;  // 0: use the schedule's K_max
};

struct TrainingSetup {
  std::uint64_t seed = 1;
  Protocol protocol = Protocol::kM2fdp;
  int workers = 1;
  std::shared_ptr<const TierTopology> topology;
  std::shared_ptr<const FederatedDataset> dataset;
  LossSpec loss;
  DPConfig dp;  // empty alphas select the composed defaults
  TrainingSchedule schedule;
  std::optional<double> gamma;  // empty: largest admissible for the probe β
  StepKind step = StepKind::kDecay;
  ControlSettings control;
  CostModel cost;
  double init_scale = 0;
  AggregationObserver observer;
};

struct TraceRow {
  int t = 0;
  long long k_total = 0;
  double eta = 0;
  int K_t = 0;
  int s_secure = 0;
  int s_insecure = 0;
  double global_loss = 0;
  double global_grad_norm = 0;
  double energy_J = 0;
  double delay_s = 0;
  long long noise_draws = 0;
};

struct TrainingResult {
  std::vector<TraceRow> trace;  // row 0 is the initial model
  NoiseLedger ledger;
  double beta = 0;      // probe estimate used for γ
  double sigma2 = 0;    // probe estimate of minibatch gradient variance
  double gamma = 0;
  int k_cal = 0;
  std::vector<double> alphas;  // resolved per-layer constants
  Vec final_model;
};

NoisePolicy PolicyFor(Protocol protocol);

struct ProbeResult {
  double beta = kBetaFloor;
  double sigma2 = 0;
};

// Smoothness and minibatch-variance estimates around w0: β from eight unit
// perturbations of the global gradient, σ² from two minibatches per device.
ProbeResult ProbeLossConstants(const TrainingSetup& setup, const Vec& w0);

// Runs the configured protocol. Baselines reuse the same loop: no-DP drops
// all noise, LDP noises every device, and the star variant flattens the
// tree to a single insecure server over all devices.
TrainingResult RunTraining(const TrainingSetup& setup);
TrainingResult RunBaseline(Protocol kind, TrainingSetup setup);

// The flattened L = 1 tree used by the star baseline.
TierTopology StarTopology(int num_devices);

}  // namespace m2fdp

#endif  // M2FDP_ENGINE_HPP_
