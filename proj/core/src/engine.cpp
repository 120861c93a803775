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

#include "m2fdp/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <string>
#include <thread>

#include "m2fdp/analysis.hpp"
#include "m2fdp/error.hpp"

namespace m2fdp {

std::string_view ProtocolName(Protocol p) {
  switch (p) {
    case Protocol::kM2fdp: return "m2fdp";
    case Protocol::kHflNoDp: return "hfl_no_dp";
    case Protocol::kHflDpLdp: return "hfl_dp_ldp";
    case Protocol::kPedpflStar: return "pedpfl_star";
  }
  return "unknown";
}

std::optional<Protocol> ParseProtocol(std::string_view name) {
  for (Protocol p : {Protocol::kM2fdp, Protocol::kHflNoDp, Protocol::kHflDpLdp,
                     Protocol::kPedpflStar}) {
    if (ProtocolName(p) == name) return p;
  }
  return std::nullopt;
}

NoisePolicy PolicyFor(Protocol protocol) {
  switch (protocol) {
    case Protocol::kM2fdp: return NoisePolicy::kTrustAware;
    case Protocol::kHflNoDp: return NoisePolicy::kNone;
    case Protocol::kHflDpLdp:
    case Protocol::kPedpflStar: return NoisePolicy::kDeviceOnly;
  }
  return NoisePolicy::kNone;
}

// ---------------------------------------------------------------------------
// Schedule

std::vector<int> TrainingSchedule::Set(int t, int layer) const {
  const int Kt = K.at(t - 1);
  std::vector<int> out;
  if (auto it = periods.find(layer); it != periods.end()) {
    for (int k = it->second; k <= Kt; k += it->second) out.push_back(k);
  } else if (auto jt = sets.find(layer); jt != sets.end()) {
    std::set<int> unique(jt->second.begin(), jt->second.end());
    for (int k : unique) {
      if (k <= Kt) out.push_back(k);
    }
  }
  return out;
}

int TrainingSchedule::LayerAt(int t, int k) const {
  for (const auto& [layer, p] : periods) {
    if (k % p == 0 && k <= K.at(t - 1)) return layer;
  }
  for (const auto& [layer, s] : sets) {
    if (k <= K.at(t - 1) && std::find(s.begin(), s.end(), k) != s.end()) return layer;
  }
  return 0;
}

int TrainingSchedule::LocalEvents(int t) const {
  int n = 0;
  for (const auto& [layer, p] : periods) n += static_cast<int>(Set(t, layer).size());
  for (const auto& [layer, s] : sets) n += static_cast<int>(Set(t, layer).size());
  return n;
}

namespace {

void CheckDisjoint(const TrainingSchedule& s, int k_max) {
  for (int k = 1; k <= k_max; ++k) {
    std::vector<int> hits;
    for (const auto& [layer, p] : s.periods) {
      if (k % p == 0) hits.push_back(layer);
    }
    for (const auto& [layer, set] : s.sets) {
      if (std::find(set.begin(), set.end(), k) != set.end()) hits.push_back(layer);
    }
    if (hits.size() > 1) {
      throw Error(ErrorCode::kOverlappingAggregationSets,
                  "layers " + std::to_string(hits[0]) + " and " +
                      std::to_string(hits[1]) + " both aggregate at iteration " +
                      std::to_string(k));
    }
  }
}

}  // namespace

TrainingSchedule BuildSchedule(int T, const std::vector<int>& K,
                               const std::map<int, int>& periods,
                               const std::map<int, std::vector<int>>& sets) {
  if (T < 1) throw Error(ErrorCode::kInvalidArgument, "T must be at least 1");
  if (K.empty() || (K.size() != 1 && static_cast<int>(K.size()) != T)) {
    throw Error(ErrorCode::kInvalidArgument, "K needs one value or one per round");
  }
  TrainingSchedule s;
  s.T = T;
  s.K = K.size() == 1 ? std::vector<int>(T, K[0]) : K;
  for (int k : s.K) {
    if (k < 1) throw Error(ErrorCode::kZeroInterval, "local interval K must be >= 1");
  }
  s.k_max = *std::max_element(s.K.begin(), s.K.end());
  for (const auto& [layer, p] : periods) {
    if (p < 1) {
      throw Error(ErrorCode::kZeroInterval,
                  "aggregation period for layer " + std::to_string(layer) + " must be >= 1");
    }
    if (sets.count(layer)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "layer " + std::to_string(layer) + " has both a period and a set");
    }
  }
  for (const auto& [layer, set] : sets) {
    for (int k : set) {
      if (k < 1) throw Error(ErrorCode::kInvalidArgument, "aggregation iterations start at 1");
    }
  }
  s.periods = periods;
  s.sets = sets;
  CheckDisjoint(s, s.k_max);
  return s;
}

// ---------------------------------------------------------------------------
// State and aggregation

RoundState InitialState(const TierTopology& topology, const Vec& w0) {
  RoundState st;
  st.global = w0;
  st.device.assign(topology.num_devices(), w0);
  const int L = topology.num_layers();
  st.node.resize(L);
  for (int l = 0; l < L; ++l) st.node[l].assign(topology.layer_size(l), w0);
  st.participants.resize(topology.layer_size(L - 1));
  for (int c = 0; c < topology.layer_size(L - 1); ++c) {
    const auto kids = topology.children(L - 1, c);
    st.participants[c].assign(kids.begin(), kids.end());
  }
  return st;
}

void LocalSgdStep(RoundState& state, int device, double eta, std::span<const double> g) {
  Axpy(-eta, g, state.device.at(device));
}

namespace {

bool AddsNoise(NoisePolicy policy, const TierTopology& topo, int parent_layer,
               int parent, int child) {
  const int L = topo.num_layers();
  const int child_layer = parent_layer + 1;
  switch (policy) {
    case NoisePolicy::kNone: return false;
    case NoisePolicy::kDeviceOnly: return child_layer == L;
    case NoisePolicy::kTrustAware:
      return !topo.is_secure(parent_layer, parent) &&
             (child_layer == L || topo.is_secure(child_layer, child));
  }
  return false;
}

void AggregateUpTo(RoundState& state, const TierTopology& topo, int top, int k,
                   const NoiseContext& ctx, const AggregationObserver& observer) {
  const int L = topo.num_layers();
  const std::size_t M = state.global.size();
  std::vector<double> sigma(L + 1, 0.0);
  if (ctx.policy != NoisePolicy::kNone) {
    for (int l = 1; l <= L; ++l) {
      sigma[l] = NoiseSigma(
          ctx.dp, SensitivityBound(l, ctx.eta, ctx.k_cal, ctx.clip_norm, ctx.stats), l);
    }
  }
  for (int l = L - 1; l >= top; --l) {
    for (int c = 0; c < topo.layer_size(l); ++c) {
      std::vector<int> kids;
      if (l == L - 1) {
        kids = state.participants.at(c);
      } else {
        const auto span = topo.children(l, c);
        kids.assign(span.begin(), span.end());
      }
      Vec acc(M, 0.0);
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
        const int i = *it;
        const Vec& v = (l + 1 == L) ? state.device[i] : state.node[l + 1][i];
        if (AddsNoise(ctx.policy, topo, l, c, i)) {
          RngStream rng(ctx.seed, StreamPurpose::kNoise,
                        {static_cast<std::uint64_t>(state.t), static_cast<std::uint64_t>(k),
                         static_cast<std::uint64_t>(l + 1), static_cast<std::uint64_t>(i)});
          const Vec n = DrawNoise(sigma[l + 1], static_cast<int>(M), rng, ctx.ledger,
                                  {state.t, k, l + 1, i});
          for (std::size_t m = 0; m < M; ++m) acc[m] += v[m] + n[m];
        } else {
          for (std::size_t m = 0; m < M; ++m) acc[m] += v[m];
        }
      }
      const double n = static_cast<double>(kids.size());
      for (double& a : acc) a /= n;
      state.node[l][c] = std::move(acc);
      if (observer) observer(l, c);
    }
  }
  for (int j = 0; j < topo.num_devices(); ++j) {
    state.device[j] = state.node[top][topo.AncestorAt(L, j, top)];
  }
  if (top == 0) state.global = state.node[0][0];
}

}  // namespace

void LocalAggregate(RoundState& state, const TierTopology& topology,
                    const TrainingSchedule& schedule, int layer, int k,
                    const NoiseContext& noise, const AggregationObserver& observer) {
  if (layer < 1 || layer > topology.num_layers() - 1 ||
      schedule.LayerAt(state.t, k) != layer) {
    throw Error(ErrorCode::kScheduleViolation,
                "layer " + std::to_string(layer) + " does not aggregate at iteration " +
                    std::to_string(k) + " of round " + std::to_string(state.t));
  }
  AggregateUpTo(state, topology, layer, k, noise, observer);
}

void GlobalAggregate(RoundState& state, const TierTopology& topology, int k,
                     const NoiseContext& noise, const AggregationObserver& observer) {
  AggregateUpTo(state, topology, 0, k, noise, observer);
}

std::vector<std::vector<int>> SampleParticipants(const TierTopology& topology,
                                                 std::span<const int> rates,
                                                 RngStream& rng) {
  const int sub = topology.num_layers() - 1;
  if (static_cast<int>(rates.size()) != topology.layer_size(sub)) {
    throw Error(ErrorCode::kRateOutOfRange, "need one rate per subnet");
  }
  std::vector<std::vector<int>> out(rates.size());
  for (std::size_t c = 0; c < rates.size(); ++c) {
    const auto kids = topology.children(sub, static_cast<int>(c));
    const int n = static_cast<int>(kids.size());
    if (rates[c] < 1 || rates[c] > n) {
      throw Error(ErrorCode::kRateOutOfRange,
                  "subnet " + std::to_string(c) + " rate " + std::to_string(rates[c]) +
                      " outside [1, " + std::to_string(n) + "]");
    }
    std::vector<int> pool(kids.begin(), kids.end());
    // Partial Fisher-Yates.
    for (int i = 0; i < rates[c]; ++i) {
      const int pick = i + static_cast<int>(rng.Index(n - i));
      std::swap(pool[i], pool[pick]);
    }
    pool.resize(rates[c]);
    std::sort(pool.begin(), pool.end());
    out[c] = std::move(pool);
  }
  return out;
}

TierTopology StarTopology(int num_devices) {
  return BuildTopology({num_devices}, {}, /*cloud_secure=*/false);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

template <typename Fn>
void ParallelFor(int n, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::vector<int>> FullParticipants(const TierTopology& topo) {
  const int sub = topo.num_layers() - 1;
  std::vector<std::vector<int>> out(topo.layer_size(sub));
  for (int c = 0; c < topo.layer_size(sub); ++c) {
    const auto kids = topo.children(sub, c);
    out[c].assign(kids.begin(), kids.end());
  }
  return out;
}

}  // namespace

ProbeResult ProbeLossConstants(const TrainingSetup& s, const Vec& w0) {
  const auto& ds = *s.dataset;
  const TierTopology& eval_topo = *s.topology;
  ProbeResult out;
  std::vector<std::pair<Vec, Vec>> trace;
  trace.emplace_back(w0, GlobalGradient(s.loss, w0, ds, eval_topo));
  for (int i = 1; i <= 8; ++i) {
    RngStream rng(s.seed, StreamPurpose::kProbe, {0, static_cast<std::uint64_t>(i)});
    Vec u(w0.size());
    for (double& v : u) v = rng.Normal();
    const double n = Norm(u);
    Vec w = w0;
    Axpy(1.0 / n, u, w);
    trace.emplace_back(w, GlobalGradient(s.loss, w, ds, eval_topo));
  }
  out.beta = EstimateBeta(trace);

  double total = 0;
  int count = 0;
  for (int j = 0; j < ds.num_devices(); ++j) {
    const Vec full = LocalGradient(s.loss, w0, ds, j);
    for (int r = 0; r < 2; ++r) {
      RngStream rng(s.seed, StreamPurpose::kProbe,
                    {1, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(r)});
      const Minibatch b = SampleMinibatch(ds, j, s.dp.q, rng);
      const Vec g = StochasticGradient(s.loss, w0, ds, b);
      const Vec d = Sub(g, full);
      total += Dot(d, d);
      ++count;
    }
  }
  out.sigma2 = count ? total / count : 0.0;
  return out;
}

namespace {

void ClassSizes(const TierTopology& topo, std::span<const int> s, int& sec, int& ins) {
  sec = 0;
  ins = 0;
  for (std::size_t c = 0; c < s.size(); ++c) {
    int& slot = SubnetSecureClass(topo, static_cast<int>(c)) ? sec : ins;
    slot = slot == 0 ? s[c] : std::min(slot, s[c]);
  }
}

}  // namespace

TrainingResult RunTraining(const TrainingSetup& in) {
  if (!in.topology || !in.dataset) {
    throw Error(ErrorCode::kInvalidArgument, "training needs a topology and a dataset");
  }
  const TierTopology& eval_topo = *in.topology;
  const FederatedDataset& ds = *in.dataset;
  if (eval_topo.num_devices() != ds.num_devices()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "topology has " + std::to_string(eval_topo.num_devices()) +
                    " devices but the dataset has " + std::to_string(ds.num_devices()));
  }

  TrainingSetup s = in;
  std::shared_ptr<const TierTopology> run_topo = in.topology;
  if (s.protocol == Protocol::kPedpflStar) {
    run_topo = std::make_shared<const TierTopology>(StarTopology(ds.num_devices()));
    s.schedule.periods.clear();
    s.schedule.sets.clear();
    if (!s.dp.alphas.empty()) s.dp.alphas = {s.dp.alphas.back()};
  }
  const TierTopology& topo = *run_topo;
  const int L = topo.num_layers();
  const int T = s.schedule.T;
  s.dp.T = T;
  s.dp.Validate();
  if (!(s.loss.clip_norm >= 0)) {
    throw Error(ErrorCode::kInvalidArgument, "clip norm must be non-negative");
  }
  for (const auto& [layer, p] : s.schedule.periods) {
    if (layer < 1 || layer > L - 1) {
      throw Error(ErrorCode::kInvalidLayer,
                  "local aggregation layer " + std::to_string(layer) + " outside [1, L-1]");
    }
  }
  for (const auto& [layer, set] : s.schedule.sets) {
    if (layer < 1 || layer > L - 1) {
      throw Error(ErrorCode::kInvalidLayer,
                  "local aggregation layer " + std::to_string(layer) + " outside [1, L-1]");
    }
  }
  int k_max = s.schedule.k_max;
  if (s.control.enabled) {
    k_max = std::max(k_max, s.control.k_max);
    if (s.control.tau <= T) {
      throw Error(ErrorCode::kInvalidArgument, "control tau must exceed T");
    }
    // Control may pick any K up to k_max; the sets must stay disjoint there.
    (void)BuildSchedule(T, {k_max}, s.schedule.periods, s.schedule.sets);
  }

  const TrustStats stats = DeriveTrustStats(topo);
  if (s.dp.alphas.empty()) s.dp.alphas = ComposedAlphas(topo);
  if (static_cast<int>(s.dp.alphas.size()) != L) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected " + std::to_string(L) + " alphas, got " +
                    std::to_string(s.dp.alphas.size()));
  }

  const int M = ModelDim(s.loss, ds.feature_dim, ds.num_classes);
  Vec w0(M, 0.0);
  if (s.init_scale > 0) {
    RngStream rng(s.seed, StreamPurpose::kInit, {0});
    for (double& v : w0) v = s.init_scale * rng.Normal();
  }

  TrainingResult result;
  const ProbeResult probe = ProbeLossConstants(in, w0);
  result.beta = probe.beta;
  result.sigma2 = probe.sigma2;
  result.k_cal = k_max;
  result.alphas = s.dp.alphas;
  const double gamma = s.gamma ? *s.gamma : MaxStepSize(probe.beta, k_max, T);
  result.gamma = gamma;
  CostModel cost = s.cost;
  cost.model_dim = M;

  const NoisePolicy policy = PolicyFor(s.protocol);
  RoundState state = InitialState(topo, w0);
  const int sub = L - 1;
  std::vector<int> full_sizes;
  for (int c = 0; c < topo.layer_size(sub); ++c) {
    full_sizes.push_back(static_cast<int>(topo.children(sub, c).size()));
  }

  auto record = [&](int t, long long k_total, double eta, int Kt, std::span<const int> sv,
                    double energy, double delay) {
    TraceRow row;
    row.t = t;
    row.k_total = k_total;
    row.eta = eta;
    row.K_t = Kt;
    ClassSizes(topo, sv, row.s_secure, row.s_insecure);
    row.global_loss = GlobalLoss(s.loss, state.global, ds, eval_topo);
    row.global_grad_norm = Norm(GlobalGradient(s.loss, state.global, ds, eval_topo));
    row.energy_J = energy;
    row.delay_s = delay;
    row.noise_draws = static_cast<long long>(result.ledger.size());
    result.trace.push_back(row);
  };
  record(0, 0, 0.0, 0, full_sizes, 0.0, 0.0);

  TrainingSchedule sched = s.schedule;
  sched.k_max = k_max;
  long long k_total = 0;
  int tau_used = 0;
  double energy_total = 0;
  double delay_total = 0;
  int prev_K = sched.K[0];
  int prev_events = sched.LocalEvents(1);

  for (int t = 1; t <= T; ++t) {
    state.t = t;
    int Kt = sched.K[t - 1];
    std::vector<int> rates = full_sizes;
    double gamma_t = gamma;
    if (s.control.enabled && t >= 2) {
      ControlProblem p;
      p.weights = s.control.weights;
      p.cost = cost;
      p.dp = s.dp;
      p.topology = &topo;
      p.stats = stats;
      p.model_dim = M;
      const int tau_t = s.control.tau - tau_used;
      // Leave at least one iteration for every later round.
      p.k_max = std::max(1, std::min(k_max, tau_t - (T - t)));
      p.ctx = {tau_t, static_cast<double>(prev_events)};
      const ControlDecision d = SolveControl(p);
      Kt = d.K;
      rates = d.s;
      gamma_t = s.gamma ? *s.gamma : TuneGamma(probe.beta, prev_K, s.control.tau);
    }
    sched.K[t - 1] = Kt;
    const double eta = s.step == StepKind::kDecay ? EtaSchedule(gamma_t, t) : gamma_t;

    if (rates == full_sizes) {
      state.participants = FullParticipants(topo);
    } else {
      RngStream prng(s.seed, StreamPurpose::kParticipation, {static_cast<std::uint64_t>(t)});
      state.participants = SampleParticipants(topo, rates, prng);
    }
    std::vector<int> active;
    for (const auto& group : state.participants) {
      active.insert(active.end(), group.begin(), group.end());
    }

    RoundAudit audit;
    audit.t = t;
    audit.eta = eta;
    audit.k_cal = k_max;
    audit.clip_norm = s.loss.clip_norm;
    audit.participants = state.participants;

    NoiseContext ctx;
    ctx.policy = policy;
    ctx.dp = s.dp;
    ctx.eta = eta;
    ctx.k_cal = k_max;
    ctx.clip_norm = s.loss.clip_norm;
    ctx.stats = stats.WithDeviceFanout(audit.min_participants());
    ctx.seed = s.seed;
    ctx.ledger = &result.ledger;

    for (int k = 1; k <= Kt; ++k) {
      ParallelFor(static_cast<int>(active.size()), s.workers, [&](int idx) {
        const int j = active[idx];
        RngStream rng(s.seed, StreamPurpose::kMinibatch,
                      {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(k),
                       static_cast<std::uint64_t>(j)});
        const Minibatch b = SampleMinibatch(ds, j, s.dp.q, rng);
        const Vec g = StochasticGradient(s.loss, state.device[j], ds, b);
        LocalSgdStep(state, j, eta, g);
      });
      if (const int layer = sched.LayerAt(t, k); layer > 0) {
        LocalAggregate(state, topo, sched, layer, k, ctx, s.observer);
        audit.events.push_back({k, layer});
      }
    }
    GlobalAggregate(state, topo, Kt + 1, ctx, s.observer);
    audit.events.push_back({Kt + 1, 0});
    result.ledger.CompleteRound(std::move(audit));

    const int events = sched.LocalEvents(t);
    const ControlContext round_ctx{Kt, static_cast<double>(events)};
    energy_total += EnergyObjective(Kt, rates, cost, topo, round_ctx);
    delay_total += DelayObjective(Kt, rates, cost, topo, round_ctx);
    k_total += Kt;
    tau_used += Kt;
    prev_K = Kt;
    prev_events = events;
    record(t, k_total, eta, Kt, rates, energy_total, delay_total);
  }
  result.final_model = state.global;
  return result;
}

TrainingResult RunBaseline(Protocol kind, TrainingSetup setup) {
  setup.protocol = kind;
  return RunTraining(setup);
}

}  // namespace m2fdp
