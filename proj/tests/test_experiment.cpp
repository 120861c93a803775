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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include <sys/wait.h>

#include "m2fdp/experiment.hpp"
#include "test_util.hpp"

namespace m2fdp {
namespace {

namespace fs = std::filesystem;
using testing::CodeOf;

nlohmann::json TinyJson() {
  return nlohmann::json::parse(R"({
    "name": "tiny",
    "seed": 3,
    "protocol": "m2fdp",
    "topology": {"layers": [2, 6], "secure_ratio": 0.5},
    "dataset": {"kind": "synthetic", "samples_per_device": 12, "feature_dim": 4,
                "num_classes": 2, "heterogeneity": 0.5},
    "loss": {"kind": "logistic", "lambda": 0.1, "clip_norm": 1.0},
    "dp": {"epsilon": 1.0, "delta": 1e-5, "q": 0.2},
    "schedule": {"T": 12, "K": 3, "local_aggregation": {"1": 2}}
  })");
}

// Field reported by ParseConfig for a broken document, or "" when it parses.
std::string FieldOf(const nlohmann::json& j) {
  try {
    ParseConfig(j.dump());
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

fs::path TempDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("m2fdp_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Config, ParsesShippedDefault) {
  const auto c = LoadConfig(std::string(M2FDP_CONFIG_DIR) + "/default.json");
  EXPECT_EQ(c.layers, (std::vector<int>{10, 50}));
  EXPECT_EQ(c.T, 200);
  EXPECT_EQ(c.K, (std::vector<int>{20}));
  EXPECT_EQ(c.periods.at(1), 5);
  EXPECT_DOUBLE_EQ(c.dp.epsilon, 1.0);
  EXPECT_EQ(c.protocol, Protocol::kM2fdp);
  const auto topo = BuildConfiguredTopology(c);
  EXPECT_EQ(topo.num_devices(), 50);
}

TEST(Config, Overrides) {
  ConfigOverrides ov;
  ov.seed = 9;
  ov.protocol = "hfl_dp_ldp";
  ov.output_dir = "elsewhere";
  const auto c = ParseConfig(TinyJson().dump(), ov);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.protocol, Protocol::kHflDpLdp);
  EXPECT_EQ(c.output_dir, "elsewhere");
}

TEST(Config, ReportsOffendingField) {
  auto j = TinyJson();
  EXPECT_EQ(FieldOf(j), "");
  j["dp"].erase("epsilon");
  EXPECT_EQ(FieldOf(j), "dp.epsilon");

  j = TinyJson();
  j["dp"]["epsilon"] = -1;
  EXPECT_EQ(FieldOf(j), "dp.epsilon");

  j = TinyJson();
  j["dataset"]["colour"] = 1;
  EXPECT_EQ(FieldOf(j), "dataset.colour");

  j = TinyJson();
  j["control"] = {{"enabled", true}, {"tau", 12}};
  EXPECT_EQ(FieldOf(j), "control.tau");

  j = TinyJson();
  j["schedule"]["local_aggregation_sets"] = {{"1", {2, 4}}, {"2", {4}}};
  EXPECT_EQ(FieldOf(j).rfind("schedule.local_aggregation_sets", 0), 0u);

  j = TinyJson();
  j["protocol"] = "carrier_pigeon";
  EXPECT_EQ(FieldOf(j), "protocol");

  EXPECT_EQ(CodeOf([] { ParseConfig("{not json"); }), ErrorCode::kConfigInvalid);
}

TEST(Config, AlphaPolicies) {
  auto j = TinyJson();
  j["dp"]["alpha_policy"] = "uniform";
  const auto u = ParseConfig(j.dump());
  EXPECT_EQ(ResolveAlphas(u, BuildConfiguredTopology(u)), (std::vector<double>{1.0, 1.0}));
  j["dp"]["alphas"] = {0.5, 1.0};
  const auto e = ParseConfig(j.dump());
  EXPECT_EQ(ResolveAlphas(e, BuildConfiguredTopology(e)), (std::vector<double>{0.5, 1.0}));
  j["dp"]["alphas"] = {0.5};
  EXPECT_EQ(FieldOf(j), "dp.alphas");
}

TEST(Artifacts, TraceBytesAreSeedDeterministic) {
  const auto c = ParseConfig(TinyJson().dump());
  const auto d1 = TempDir("det1");
  const auto d2 = TempDir("det2");
  WriteArtifacts(RunExperiment(c), d1.string());
  WriteArtifacts(RunExperiment(c), d2.string());
  for (const char* f : {"trace.csv", "ledger.csv", "rounds.json", "bound_report.json",
                        "summary.json"}) {
    EXPECT_EQ(ReadFile((d1 / f).string()), ReadFile((d2 / f).string())) << f;
  }
  ConfigOverrides ov;
  ov.seed = 4;
  const auto other = RunExperiment(ParseConfig(TinyJson().dump(), ov));
  EXPECT_NE(TraceCsv(other.result.trace), ReadFile((d1 / "trace.csv").string()));
}

TEST(Artifacts, SummaryRecomputableFromTrace) {
  const auto a = RunExperiment(ParseConfig(TinyJson().dump()));
  const auto rows = ParseTraceCsv(TraceCsv(a.result.trace));
  ASSERT_EQ(rows.size(), a.result.trace.size());
  const Summary s = Summarize(rows);
  EXPECT_EQ(s.rounds, 12);
  EXPECT_NEAR(s.final_grad_norm, a.summary.final_grad_norm, 1e-12);
  EXPECT_NEAR(s.plateau_grad_norm, a.summary.plateau_grad_norm, 1e-12);
  EXPECT_NEAR(s.total_energy_J, a.summary.total_energy_J, 1e-9);
  EXPECT_EQ(s.total_noise_draws, a.summary.total_noise_draws);
  // plateau: mean over the last ceil(12 / 4) rounds
  double want = 0;
  for (std::size_t i = rows.size() - 3; i < rows.size(); ++i) want += rows[i].global_grad_norm;
  EXPECT_NEAR(a.summary.plateau_grad_norm, want / 3, 1e-12);

  const auto back = ParseAuditJson(AuditJson(a.result.ledger.audits()));
  EXPECT_EQ(AuditJson(back), AuditJson(a.result.ledger.audits()));

  const auto report = nlohmann::json::parse(BoundReportJson(a.bound));
  EXPECT_NEAR(report["bound"].get<double>(),
              report["a1"].get<double>() + report["a2"].get<double>() +
                  report["gap"].get<double>(),
              1e-9 * std::abs(report["bound"].get<double>()));
}

TEST(Compare, RejectsEmptyAndMismatchedSets) {
  EXPECT_EQ(CodeOf([] { CompareRuns({}, CompareAxis::kEpsilon); }), ErrorCode::kAxisMismatch);
  auto j = TinyJson();
  const auto a = ParseConfig(j.dump());
  j["schedule"]["T"] = 13;
  const auto b = ParseConfig(j.dump());
  EXPECT_EQ(CodeOf([&] { CompareRuns({a, b}, CompareAxis::kEpsilon); }),
            ErrorCode::kAxisMismatch);
  EXPECT_FALSE(ParseCompareAxis("colour"));
  EXPECT_EQ(ParseCompareAxis("epsilon"), CompareAxis::kEpsilon);
}

TEST(Compare, EpsilonAxisScalesGapInverseSquare) {
  auto j = TinyJson();
  j["schedule"]["T"] = 6;
  const auto a = ParseConfig(j.dump());
  j["dp"]["epsilon"] = 0.5;
  j["name"] = "half";
  const auto b = ParseConfig(j.dump());
  const auto rows = CompareRuns({a, b}, CompareAxis::kEpsilon);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].axis_value, "dp.epsilon=1.0");
  EXPECT_EQ(rows[1].label, "half");
  EXPECT_NEAR(rows[1].analytic_gap / rows[0].analytic_gap, 4.0, 1e-9);
  const auto csv = CompareCsv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Verify, StoredRunPasses) {
  const auto c = ParseConfig(TinyJson().dump());
  const auto dir = TempDir("verify");
  WriteArtifacts(RunExperiment(c), dir.string());
  const auto report = VerifyStoredRun(c, dir.string());
  EXPECT_FALSE(report.rows.empty());
  EXPECT_TRUE(report.all_pass());
  const auto j = nlohmann::json::parse(ProtectionJson(report));
  EXPECT_TRUE(j.is_object());
}

TEST(Sweep, ConfiguredGridProducesRows) {
  auto j = TinyJson();
  j["control"] = {{"K_max", 4}, {"tau", 30}, {"sweep", {{"energy", {1, 10}}, {"delay", {1}},
                                                      {"gap", {0, 1}}, {"e_iter", {1e-3}}}}};
  const auto rows = ConfiguredControlSweep(ParseConfig(j.dump()));
  EXPECT_EQ(rows.size(), 4u);
  const auto csv = SweepCsv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

#ifdef M2FDP_CLI_PATH
int RunCli(const std::string& args) {
  const std::string cmd = std::string(M2FDP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = TempDir("cli");
  const auto good = dir / "good.json";
  const auto bad = dir / "bad.json";
  const auto later = dir / "later.json";
  std::ofstream(good) << TinyJson().dump();
  auto j = TinyJson();
  j["dp"].erase("epsilon");
  std::ofstream(bad) << j.dump();
  j = TinyJson();
  j["schedule"]["T"] = 7;
  std::ofstream(later) << j.dump();

  const std::string out = (dir / "run").string();
  EXPECT_EQ(RunCli("run --config " + good.string() + " --out " + out), 0);
  EXPECT_TRUE(fs::exists(fs::path(out) / "trace.csv"));
  EXPECT_EQ(RunCli("verify-privacy --config " + good.string() + " --run " + out), 0);
  EXPECT_EQ(RunCli("run --config " + bad.string()), 2);
  EXPECT_EQ(RunCli("run --config " + (dir / "missing.json").string()), 3);
  EXPECT_EQ(RunCli("compare " + good.string() + " " + later.string() + " --axis epsilon"), 2);
  EXPECT_EQ(RunCli("bound-report --config " + good.string()), 0);
  EXPECT_EQ(RunCli("frobnicate"), 2);
}
#endif

}  // namespace
}  // namespace m2fdp
