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

#ifndef M2FDP_EXPERIMENT_HPP_
#define M2FDP_EXPERIMENT_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "m2fdp/analysis.hpp"
#include "m2fdp/control.hpp"
#include "m2fdp/dataset.hpp"
#include "m2fdp/engine.hpp"
#include "m2fdp/privacy.hpp"
#include "m2fdp/topology.hpp"

namespace m2fdp {

struct DatasetSpec {
  enum class Kind { kSynthetic, kCsv } kind = Kind::kSynthetic;
  int samples_per_device = 50;
  int feature_dim = 10;
  int num_classes = 2;
  double heterogeneity = 0.5;
  double separation = 1.0;
  std::string path;
  PartitionStrategy strategy = PartitionStrategy::kIid;
};

enum class AlphaPolicy { kComposed, kUniform };

// A parsed and cross-validated experiment. The JSON schema is documented in
// README.md; `source_json` keeps the document (overrides applied) for axis
// comparisons.
struct ExperimentConfig {
  std::string source_json;
  std::string name;
  std::uint64_t seed = 1;
  Protocol protocol = Protocol::kM2fdp;
  int workers = 1;

  std::vector<int> layers;
  bool cloud_secure = false;
  TrustAssignment trust;

  DatasetSpec dataset;
  LossSpec loss;
  double init_scale = 0;

  DPConfig dp;  // alphas empty unless given explicitly
  AlphaPolicy alpha_policy = AlphaPolicy::kComposed;

  int T = 1;
  std::vector<int> K = {1};
  std::map<int, int> periods;
  std::map<int, std::vector<int>> sets;
  std::optional<double> gamma;
  StepKind step = StepKind::kDecay;

  ControlSettings control;
  CostModel cost;
  std::vector<ObjectiveWeights> sweep_weights;
  std::vector<double> sweep_e_iter;

  std::string output_dir = "out";
};

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> protocol;
  std::optional<std::string> output_dir;
};

// Throws ConfigError naming the offending field.
ExperimentConfig ParseConfig(std::string_view json_text,
                             const ConfigOverrides& overrides = {});
ExperimentConfig LoadConfig(const std::string& path,
                            const ConfigOverrides& overrides = {});

TierTopology BuildConfiguredTopology(const ExperimentConfig& config);
FederatedDataset BuildConfiguredDataset(const ExperimentConfig& config);
TrainingSetup MakeSetup(const ExperimentConfig& config);

// The topology whose trust structure the protocol's noise actually follows:
// the configured tree for m2fdp, a fully trusted copy for hfl_no_dp, a fully
// untrusted copy for hfl_dp_ldp and the flattened star for pedpfl_star.
TierTopology AnalyticTopology(Protocol protocol, const TierTopology& topology);

// Accountant constants the run uses for `topology`.
std::vector<double> ResolveAlphas(const ExperimentConfig& config,
                                  const TierTopology& topology);

struct Summary {
  int rounds = 0;
  long long k_total = 0;
  double final_loss = 0;
  double final_grad_norm = 0;
  double plateau_grad_norm = 0;  // mean over the last quarter of rounds
  double min_loss = 0;
  double total_energy_J = 0;
  double total_delay_s = 0;
  long long total_noise_draws = 0;
};

Summary Summarize(const std::vector<TraceRow>& trace);

struct ExperimentArtifacts {
  ExperimentConfig config;
  TrainingResult result;
  BoundReport bound;
  Summary summary;
};

ExperimentArtifacts RunExperiment(const ExperimentConfig& config);

// Analytic report without training. a1 uses F(w1) − 0 as the loss drop.
BoundReport PredictiveBoundReport(const ExperimentConfig& config);
long double AnalyticGap(const ExperimentConfig& config);

std::string TraceCsv(const std::vector<TraceRow>& trace);
std::vector<TraceRow> ParseTraceCsv(std::string_view text);
std::string BoundReportJson(const BoundReport& report);
std::string SummaryJson(const Summary& summary);
std::string AuditJson(const std::vector<RoundAudit>& audits);
std::vector<RoundAudit> ParseAuditJson(std::string_view text);

// temp file + rename
void WriteFileAtomic(const std::string& path, const std::string& content);
std::string ReadFile(const std::string& path);

// trace.csv, ledger.csv, rounds.json, bound_report.json, summary.json
void WriteArtifacts(const ExperimentArtifacts& artifacts, const std::string& dir);

enum class CompareAxis { kProtocol, kP, kEpsilon, kS, kL };
std::optional<CompareAxis> ParseCompareAxis(std::string_view name);

struct CompareRow {
  std::string label;
  std::string protocol;
  std::string axis_value;
  Summary summary;
  double analytic_gap = 0;
};

// Runs each config in order. Fails with kAxisMismatch when the list is empty
// or two configs differ outside the axis.
std::vector<CompareRow> CompareRuns(const std::vector<ExperimentConfig>& configs,
                                    CompareAxis axis);
std::string CompareCsv(const std::vector<CompareRow>& rows);

std::vector<SweepRow> ConfiguredControlSweep(const ExperimentConfig& config);
std::string SweepCsv(const std::vector<SweepRow>& rows);

// Re-checks a stored run (ledger.csv + rounds.json in `run_dir`).
ProtectionReport VerifyStoredRun(const ExperimentConfig& config,
                                 const std::string& run_dir);
std::string ProtectionJson(const ProtectionReport& report);

}  // namespace m2fdp

#endif  // M2FDP_EXPERIMENT_HPP_
