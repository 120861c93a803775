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

// m2fdp: run, compare and audit multi-tier federated training experiments.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "m2fdp/error.hpp"
#include "m2fdp/experiment.hpp"

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> protocol;

  m2fdp::ConfigOverrides Overrides() const { return {seed, protocol, out}; }
};

void AddCommon(CLI::App* app, CommonFlags& f, bool need_config = true) {
  auto* opt = app->add_option("--config", f.config, "experiment config (JSON)");
  if (need_config) opt->required();
  app->add_option("--seed", f.seed, "override the config seed");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--protocol", f.protocol, "m2fdp | hfl_no_dp | hfl_dp_ldp | pedpfl_star");
}

void ReportError(const std::string& kind, const std::string& field, const std::string& message,
                 const std::string& cause = "") {
  nlohmann::ordered_json j;
  j["error"] = kind;
  if (!field.empty()) j["field"] = field;
  if (!cause.empty() && cause != kind) j["cause"] = cause;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

int Run(const CommonFlags& f) {
  const auto config = m2fdp::LoadConfig(f.config, f.Overrides());
  const auto artifacts = m2fdp::RunExperiment(config);
  m2fdp::WriteArtifacts(artifacts, config.output_dir);
  std::cout << m2fdp::SummaryJson(artifacts.summary);
  return 0;
}

int Compare(const std::vector<std::string>& paths, const std::string& axis_name,
            const CommonFlags& f) {
  const auto axis = m2fdp::ParseCompareAxis(axis_name);
  if (!axis) throw m2fdp::ConfigError("axis", "expected protocol, p, epsilon, s or L");
  std::vector<m2fdp::ExperimentConfig> configs;
  m2fdp::ConfigOverrides ov{f.seed, std::nullopt, std::nullopt};
  for (const auto& p : paths) configs.push_back(m2fdp::LoadConfig(p, ov));
  const std::string csv = m2fdp::CompareCsv(m2fdp::CompareRuns(configs, *axis));
  if (f.out) {
    std::filesystem::create_directories(*f.out);
    m2fdp::WriteFileAtomic((std::filesystem::path(*f.out) / "compare.csv").string(), csv);
  }
  std::cout << csv;
  return 0;
}

int BoundReport(const CommonFlags& f) {
  const auto config = m2fdp::LoadConfig(f.config, f.Overrides());
  const std::string json = m2fdp::BoundReportJson(m2fdp::PredictiveBoundReport(config));
  if (f.out) {
    std::filesystem::create_directories(*f.out);
    m2fdp::WriteFileAtomic((std::filesystem::path(*f.out) / "bound_report.json").string(), json);
  }
  std::cout << json;
  return 0;
}

int ControlSweep(const CommonFlags& f) {
  const auto config = m2fdp::LoadConfig(f.config, f.Overrides());
  const std::string csv = m2fdp::SweepCsv(m2fdp::ConfiguredControlSweep(config));
  if (f.out) {
    std::filesystem::create_directories(*f.out);
    m2fdp::WriteFileAtomic((std::filesystem::path(*f.out) / "control_sweep.csv").string(), csv);
  }
  std::cout << csv;
  return 0;
}

int VerifyPrivacy(const CommonFlags& f, const std::optional<std::string>& run_dir) {
  const auto config = m2fdp::LoadConfig(f.config, f.Overrides());
  const auto report = m2fdp::VerifyStoredRun(config, run_dir.value_or(config.output_dir));
  std::cout << m2fdp::ProtectionJson(report);
  return report.all_pass() ? 0 : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-tier federated training with trust-aware differential privacy"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "train one configured experiment and write artifacts");
  AddCommon(run, run_flags);

  CommonFlags cmp_flags;
  std::vector<std::string> cmp_configs;
  std::string axis;
  auto* cmp = app.add_subcommand("compare", "run configs that differ along one axis");
  cmp->add_option("configs", cmp_configs, "config files, one row each")->required();
  cmp->add_option("--axis", axis, "protocol | p | epsilon | s | L")->required();
  cmp->add_option("--seed", cmp_flags.seed, "override every config seed");
  cmp->add_option("--out", cmp_flags.out, "directory for compare.csv");

  CommonFlags bound_flags;
  auto* bound = app.add_subcommand("bound-report", "analytic bound report without training");
  AddCommon(bound, bound_flags);

  CommonFlags sweep_flags;
  auto* sweep = app.add_subcommand("control-sweep", "solve the control problem over a weight grid");
  AddCommon(sweep, sweep_flags);

  CommonFlags verify_flags;
  std::optional<std::string> run_dir;
  auto* verify = app.add_subcommand("verify-privacy", "re-check node protection for a stored run");
  AddCommon(verify, verify_flags);
  verify->add_option("--run", run_dir, "run directory (defaults to the config's output dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return Run(run_flags);
    if (*cmp) return Compare(cmp_configs, axis, cmp_flags);
    if (*bound) return BoundReport(bound_flags);
    if (*sweep) return ControlSweep(sweep_flags);
    if (*verify) return VerifyPrivacy(verify_flags, run_dir);
  } catch (const m2fdp::ConfigError& e) {
    ReportError("ConfigInvalid", e.field(), e.what(),
                std::string(m2fdp::ErrorCodeName(e.cause())));
    return kExitConfig;
  } catch (const m2fdp::Error& e) {
    ReportError(std::string(m2fdp::ErrorCodeName(e.code())), "", e.what());
    return e.code() == m2fdp::ErrorCode::kAxisMismatch ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    ReportError("Internal", "", e.what());
    return kExitRuntime;
  }
  return 0;
}
