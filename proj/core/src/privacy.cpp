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

#include "m2fdp/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

#include "internal/format.hpp"
#include "m2fdp/analysis.hpp"
#include "m2fdp/error.hpp"

namespace m2fdp {

void DPConfig::Validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  }
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorCode::kInvalidQ, "q must lie in (0, 1]");
  if (T < 1) throw Error(ErrorCode::kInvalidArgument, "T must be at least 1");
  if (!(c1 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "c1 must be positive");
  for (double a : alphas) {
    if (!(a > 0.0)) throw Error(ErrorCode::kInvalidArgument, "alphas must be positive");
  }
  if (!(epsilon < c1 * q * T)) {
    throw Error(ErrorCode::kAccountantPremiseViolated,
                "accountant requires epsilon < c1*q*T (" + std::to_string(epsilon) +
                    " >= " + std::to_string(c1 * q * T) + ")");
  }
}

double SensitivityBound(int layer, double eta, int K, double G,
                        const TrustStats& stats) {
  const int L = stats.num_layers;
  if (layer < 1 || layer > L) {
    throw Error(ErrorCode::kInvalidLayer,
                "sensitivity layer " + std::to_string(layer) + " outside [1, " +
                    std::to_string(L) + "]");
  }
  double denom = 1.0;
  for (int l = layer; l <= L - 1; ++l) denom *= stats.min_fanout[l];
  return 2.0 * eta * K * G / denom;
}

double NoiseSigma(const DPConfig& dp, double sensitivity, int layer) {
  dp.Validate();
  return dp.alpha(layer) * dp.q * sensitivity *
         std::sqrt(dp.T * std::log(1.0 / dp.delta)) / dp.epsilon;
}

int RoundAudit::min_participants() const {
  int best = 0;
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const int n = static_cast<int>(participants[i].size());
    best = (i == 0) ? n : std::min(best, n);
  }
  return best;
}

NoiseLedger::NoiseLedger(const NoiseLedger& other) {
  std::lock_guard lock(other.mu_);
  draws_ = other.draws_;
  audits_ = other.audits_;
}

NoiseLedger& NoiseLedger::operator=(const NoiseLedger& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  draws_ = other.draws_;
  audits_ = other.audits_;
  return *this;
}

void NoiseLedger::Append(const NoiseDraw& draw) {
  std::lock_guard lock(mu_);
  draws_.push_back(draw);
}

void NoiseLedger::CompleteRound(RoundAudit audit) {
  std::lock_guard lock(mu_);
  audits_.push_back(std::move(audit));
}

std::vector<NoiseDraw> NoiseLedger::draws() const {
  std::lock_guard lock(mu_);
  return draws_;
}

std::vector<RoundAudit> NoiseLedger::audits() const {
  std::lock_guard lock(mu_);
  return audits_;
}

std::optional<RoundAudit> NoiseLedger::audit(int t) const {
  std::lock_guard lock(mu_);
  for (const auto& a : audits_) {
    if (a.t == t) return a;
  }
  return std::nullopt;
}

std::size_t NoiseLedger::size() const {
  std::lock_guard lock(mu_);
  return draws_.size();
}

void NoiseLedger::WriteCsv(std::ostream& out) const {
  using internal::FormatDouble;
  out << "t,k,layer,node,sigma2,M,stream\n";
  for (const auto& d : draws()) {
    out << d.t << ',' << d.k << ',' << d.layer << ',' << d.node << ','
        << FormatDouble(d.sigma2) << ',' << d.dim << ',' << d.stream << '\n';
  }
}

NoiseLedger NoiseLedger::ReadCsv(std::istream& in) {
  NoiseLedger ledger;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 || line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    NoiseDraw d;
    if (!(ss >> d.t >> d.k >> d.layer >> d.node >> d.sigma2 >> d.dim >> d.stream)) {
      throw Error(ErrorCode::kMalformedRow,
                  "ledger line " + std::to_string(line_no) + " is malformed");
    }
    ledger.draws_.push_back(d);
  }
  return ledger;
}

Vec DrawNoise(double sigma, int dim, RngStream& rng, NoiseLedger* ledger,
              const NoiseTag& tag) {
  Vec out(dim, 0.0);
  if (sigma > 0.0) {
    for (double& v : out) v = sigma * rng.Normal();
  }
  if (ledger) {
    ledger->Append({tag.t, tag.k, tag.layer, tag.node, sigma * sigma, dim, rng.key()});
  }
  return out;
}

long double ExpectedPropagatedVariance(const TrustStats& stats,
                                       const DPConfig& dp, double eta, int K,
                                       double G, int model_dim, int layer) {
  const int L = stats.num_layers;
  if (layer < 1 || layer > L - 1) {
    throw Error(ErrorCode::kInvalidLayer,
                "propagated variance is defined for layers 1..L-1");
  }
  std::vector<double> alphas;
  for (int l = 1; l <= L; ++l) alphas.push_back(dp.alpha(l));
  const auto terms = AbcTerms(stats, alphas);
  const long double e = eta;
  const long double q = dp.q;
  const long double eps = dp.epsilon;
  const long double pre = 2.0L * e * e * model_dim * K * K * dp.T * q * q *
                          static_cast<long double>(G) * G *
                          std::log(1.0L / static_cast<long double>(dp.delta)) /
                          (eps * eps);
  return pre * terms[layer - 1].sum();
}

std::vector<double> ComposedAlphas(const TierTopology& topology) {
  const int L = topology.num_layers();
  std::vector<double> alphas(L, 1.0);
  // weight[l][c]: Σ φ² α_src² for an insecure node c at layer l.
  std::vector<std::vector<double>> weight(L + 1);
  for (int l = L - 1; l >= 1; --l) {
    weight[l].assign(topology.layer_size(l), 0.0);
    double best = -1.0;
    for (int c = 0; c < topology.layer_size(l); ++c) {
      if (topology.is_secure(l, c)) continue;
      const auto kids = topology.children(l, c);
      const double rho = 1.0 / kids.size();
      double sum = 0.0;
      for (int kid : kids) {
        const bool fresh = (l + 1 == L) || topology.is_secure(l + 1, kid);
        const double a = alphas[l];  // α_{l+1}
        sum += rho * rho * (fresh ? a * a : weight[l + 1][kid]);
      }
      weight[l][c] = sum;
      const double alpha = std::sqrt(sum);
      best = (best < 0) ? alpha : std::min(best, alpha);
    }
    if (best > 0) alphas[l - 1] = best;
  }
  return alphas;
}

bool ProtectionReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
}

ProtectionReport VerifyNodeProtection(const TierTopology& topology,
                                      const TrustStats& stats,
                                      const DPConfig& dp,
                                      const NoiseLedger& ledger, int t) {
  const auto audit = ledger.audit(t);
  if (!audit) {
    throw Error(ErrorCode::kIncompleteLedger,
                "ledger holds no completion record for round " + std::to_string(t));
  }
  const int L = topology.num_layers();
  if (static_cast<int>(audit->participants.size()) != topology.layer_size(L - 1)) {
    throw Error(ErrorCode::kIncompleteLedger,
                "round audit does not match the topology");
  }

  std::map<std::tuple<int, int, int>, double> fresh;
  for (const auto& d : ledger.draws()) {
    if (d.t == t) fresh[{d.k, d.layer, d.node}] += d.sigma2;
  }

  const TrustStats eff = stats.WithDeviceFanout(audit->min_participants());
  std::vector<double> required(L + 1, 0.0);
  for (int l = 1; l <= L; ++l) {
    const double s = NoiseSigma(
        dp, SensitivityBound(l, audit->eta, audit->k_cal, audit->clip_norm, eff), l);
    required[l] = s * s;
  }

  auto kids_of = [&](int l, int c) -> std::vector<int> {
    if (l == L - 1) return audit->participants[c];
    const auto span = topology.children(l, c);
    return {span.begin(), span.end()};
  };

  ProtectionReport report;
  for (const auto& ev : audit->events) {
    std::vector<std::vector<double>> carried(L + 1);
    for (int l = L; l >= std::max(ev.top_layer + 1, 1); --l) {
      carried[l].assign(topology.layer_size(l), 0.0);
      for (int i = 0; i < topology.layer_size(l); ++i) {
        double v = 0.0;
        if (auto it = fresh.find({ev.k, l, i}); it != fresh.end()) v = it->second;
        if (l < L) {
          const auto kids = kids_of(l, i);
          for (int kid : kids) {
            v += carried[l + 1][kid] / (static_cast<double>(kids.size()) * kids.size());
          }
        }
        carried[l][i] = v;
      }
    }
    for (int l = ev.top_layer; l <= L - 1; ++l) {
      for (int c = 0; c < topology.layer_size(l); ++c) {
        if (topology.is_secure(l, c)) continue;
        for (int kid : kids_of(l, c)) {
          ProtectionRow row;
          row.t = t;
          row.k = ev.k;
          row.receiver_layer = l;
          row.receiver_node = c;
          row.layer = l + 1;
          row.node = kid;
          if (l + 1 == L || topology.is_secure(l + 1, kid)) {
            row.kase = ProtectionCase::kFresh;
          } else {
            const auto grand = kids_of(l + 1, kid);
            const bool all_fresh = std::all_of(grand.begin(), grand.end(), [&](int g) {
              return l + 2 == L || topology.is_secure(l + 2, g);
            });
            row.kase = all_fresh ? ProtectionCase::kComposedFresh
                                 : ProtectionCase::kComposedDeep;
          }
          row.effective = carried[l + 1][kid];
          row.required = required[l + 1];
          row.pass = row.effective >= row.required * (1.0 - 1e-12);
          report.rows.push_back(row);
        }
      }
    }
  }
  return report;
}

}  // namespace m2fdp
