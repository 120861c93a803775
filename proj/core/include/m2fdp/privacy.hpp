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

#ifndef M2FDP_PRIVACY_HPP_
#define M2FDP_PRIVACY_HPP_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "m2fdp/dp_config.hpp"
#include "m2fdp/rng.hpp"
#include "m2fdp/topology.hpp"
#include "m2fdp/vec.hpp"

namespace m2fdp {

// Δ_l = 2ηKG / Π_{l'=l}^{L-1} s_{l'}; the product is empty at l = L.
double SensitivityBound(int layer, double eta, int K, double G,
                        const TrustStats& stats);

// σ = α_l q Δ √(T ln(1/δ)) / ε. Validates dp first.
double NoiseSigma(const DPConfig& dp, double sensitivity, int layer);

struct NoiseDraw {
  int t = 0;
  int k = 0;
  int layer = 0;
  int node = 0;
  double sigma2 = 0;
  int dim = 0;
  std::uint64_t stream = 0;
};

// Everything the composition verifier needs to know about one round besides
// the draws themselves. Recording it marks the round complete.
struct RoundAudit {
  struct Event {
    int k = 0;
    int top_layer = 0;  // 0 is the global aggregation at k = K^t + 1
  };
  int t = 0;
  double eta = 0;
  int k_cal = 0;  // K used for calibration
  double clip_norm = 0;
  // Participating devices per layer-(L-1) node.
  std::vector<std::vector<int>> participants;
  std::vector<Event> events;

  int min_participants() const;
};

// Append-only record of injected noise. Appends are serialized by a mutex;
// readers take a snapshot.
class NoiseLedger {
 public:
  NoiseLedger() = default;
  NoiseLedger(const NoiseLedger& other);
  NoiseLedger& operator=(const NoiseLedger& other);

  void Append(const NoiseDraw& draw);
  void CompleteRound(RoundAudit audit);

  std::vector<NoiseDraw> draws() const;
  std::vector<RoundAudit> audits() const;
  std::optional<RoundAudit> audit(int t) const;
  std::size_t size() const;

  // CSV header: t,k,layer,node,sigma2,M,stream
  void WriteCsv(std::ostream& out) const;
  // Reads draws only; audits are stored separately.
  static NoiseLedger ReadCsv(std::istream& in);

 private:
  mutable std::mutex mu_;
  std::vector<NoiseDraw> draws_;
  std::vector<RoundAudit> audits_;
};

struct NoiseTag {
  int t = 0;
  int k = 0;
  int layer = 0;
  int node = 0;
};

// M i.i.d. N(0, σ²) coordinates. The draw is recorded when a ledger is given.
Vec DrawNoise(double sigma, int dim, RngStream& rng, NoiseLedger* ledger,
              const NoiseTag& tag);

// Upper bound on E‖Σ_i ρ_i n_{l+1,i}‖² for noise entering layer l:
// 2η²MK²Tq²G² ln(1/δ)/ε² · (A_l + B_l + C_l).
long double ExpectedPropagatedVariance(const TrustStats& stats,
                                       const DPConfig& dp, double eta, int K,
                                       double G, int model_dim, int layer);

// Default accountant constants, alphas[l-1] for layer l. α_L = 1. For each
// intermediate layer, α_l is the smallest √(Σ φ² α_src²) over its insecure
// nodes, where the sum runs over fresh-noise sources below the node (secure
// children and devices, reached through insecure children) and φ is the
// product of aggregation weights on the path. Layers without insecure nodes
// get 1.
std::vector<double> ComposedAlphas(const TierTopology& topology);

enum class ProtectionCase {
  kFresh = 1,          // sender draws its own noise
  kComposedFresh = 2,  // insecure sender, every child draws fresh noise
  kComposedDeep = 3,   // insecure sender with insecure children
};

struct ProtectionRow {
  int t = 0;
  int k = 0;
  int receiver_layer = 0;
  int receiver_node = 0;
  int layer = 0;  // sender
  int node = 0;
  ProtectionCase kase = ProtectionCase::kFresh;
  double effective = 0;  // composed per-coordinate variance on the message
  double required = 0;
  bool pass = false;
};

struct ProtectionReport {
  std::vector<ProtectionRow> rows;
  bool all_pass() const;
};

// Checks every message sent to an insecure node during round t. The carried
// variance of a sender is its own fresh draw plus Σ ρ² of what its
// participating children carried. Required variance uses the layer's α and
// the round's calibration (η, K, G, sampled device fanout).
ProtectionReport VerifyNodeProtection(const TierTopology& topology,
                                      const TrustStats& stats,
                                      const DPConfig& dp,
                                      const NoiseLedger& ledger, int t);

}  // namespace m2fdp

#endif  // M2FDP_PRIVACY_HPP_
