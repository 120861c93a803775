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

#include "m2fdp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "internal/format.hpp"
#include "json.hpp"
#include "m2fdp/error.hpp"

namespace m2fdp {

using nlohmann::json;
using nlohmann::ordered_json;
using internal::FormatDouble;

namespace {

// Typed access to one JSON object with dotted field paths in every error.
class Section {
 public:
  Section(const json* node, std::string path, std::vector<std::string> allowed)
      : node_(node), path_(std::move(path)) {
    if (!node_) return;
    if (!node_->is_object()) throw ConfigError(path_, "expected an object");
    for (const auto& [key, value] : node_->items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ConfigError(Field(key), "unknown field");
      }
    }
  }

  std::string Field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  bool Has(const std::string& key) const {
    return node_ && node_->contains(key) && !(*node_)[key].is_null();
  }
  const json& Raw(const std::string& key) const { return (*node_)[key]; }

  Section Sub(const std::string& key, std::vector<std::string> allowed) const {
    return Section(Has(key) ? &Raw(key) : nullptr, Field(key), std::move(allowed));
  }

  void Require(const std::string& key) const {
    if (!Has(key)) throw ConfigError(Field(key), "required field is missing");
  }

  double Double(const std::string& key, std::optional<double> fallback = {}) const {
    if (!Has(key)) {
      if (fallback) return *fallback;
      Require(key);
    }
    const json& v = Raw(key);
    if (!v.is_number()) throw ConfigError(Field(key), "expected a number");
    return v.get<double>();
  }

  long long Int(const std::string& key, std::optional<long long> fallback = {}) const {
    if (!Has(key)) {
      if (fallback) return *fallback;
      Require(key);
    }
    return AsInt(Raw(key), Field(key));
  }

  bool Bool(const std::string& key, bool fallback) const {
    if (!Has(key)) return fallback;
    if (!Raw(key).is_boolean()) throw ConfigError(Field(key), "expected true or false");
    return Raw(key).get<bool>();
  }

  std::string String(const std::string& key, std::optional<std::string> fallback = {}) const {
    if (!Has(key)) {
      if (fallback) return *fallback;
      Require(key);
    }
    if (!Raw(key).is_string()) throw ConfigError(Field(key), "expected a string");
    return Raw(key).get<std::string>();
  }

  static long long AsInt(const json& v, const std::string& field) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
    }
    throw ConfigError(field, "expected an integer");
  }

 private:
  const json* node_;
  std::string path_;
};

std::vector<int> IntList(const Section& s, const std::string& key) {
  const json& v = s.Raw(key);
  std::vector<int> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(static_cast<int>(Section::AsInt(v[i], s.Field(key) + "[" + std::to_string(i) + "]")));
    }
  } else {
    out.push_back(static_cast<int>(Section::AsInt(v, s.Field(key))));
  }
  return out;
}

std::vector<double> DoubleList(const Section& s, const std::string& key) {
  const json& v = s.Raw(key);
  std::vector<double> out;
  auto one = [&](const json& x) {
    if (!x.is_number()) throw ConfigError(s.Field(key), "expected numbers");
    out.push_back(x.get<double>());
  };
  if (v.is_array()) {
    for (const auto& x : v) one(x);
  } else {
    one(v);
  }
  return out;
}

std::string TopologyField(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyLayer:
    case ErrorCode::kEmptySubnet:
    case ErrorCode::kOrphanNode: return "topology.layers";
    case ErrorCode::kTrustInconsistent:
    case ErrorCode::kInvalidLayer: return "topology.trust";
    default: return "topology";
  }
}

void ParseTopology(const Section& root, ExperimentConfig& cfg) {
  const Section topo = root.Sub("topology", {"layers", "cloud_secure", "trust", "secure_ratio"});
  topo.Require("layers");
  cfg.layers = IntList(topo, "layers");
  cfg.cloud_secure = topo.Bool("cloud_secure", false);
  const int L = static_cast<int>(cfg.layers.size());
  if (topo.Has("trust") && topo.Has("secure_ratio")) {
    throw ConfigError(topo.Field("trust"), "give either trust or secure_ratio, not both");
  }
  if (topo.Has("trust")) {
    const json& t = topo.Raw("trust");
    if (!t.is_object()) throw ConfigError(topo.Field("trust"), "expected an object of \"l:c\" keys");
    for (const auto& [key, value] : t.items()) {
      const std::string field = topo.Field("trust") + "." + key;
      int l = 0;
      int c = 0;
      char colon = 0;
      std::istringstream ss(key);
      if (!(ss >> l >> colon >> c) || colon != ':' || !ss.eof()) {
        throw ConfigError(field, "trust keys look like \"layer:node\"");
      }
      if (!value.is_string() || (value != "secure" && value != "insecure")) {
        throw ConfigError(field, "expected \"secure\" or \"insecure\"");
      }
      cfg.trust[{l, c}] = value == "secure" ? Trust::kSecure : Trust::kInsecure;
    }
  } else if (topo.Has("secure_ratio")) {
    std::vector<double> ratios = DoubleList(topo, "secure_ratio");
    if (ratios.size() == 1 && L - 1 > 1) ratios.assign(L - 1, ratios[0]);
    if (L == 1) ratios.clear();
    if (static_cast<int>(ratios.size()) != L - 1) {
      throw ConfigError(topo.Field("secure_ratio"),
                        "need one ratio or one per intermediate layer");
    }
    try {
      cfg.trust = TrustFromRatios(cfg.layers, ratios, cfg.cloud_secure);
    } catch (const Error& e) {
      throw ConfigError(topo.Field("secure_ratio"), e.what(), e.code());
    }
  }
  try {
    (void)BuildConfiguredTopology(cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(TopologyField(e.code()), e.what(), e.code());
  }
}

void ParseDataset(const Section& root, ExperimentConfig& cfg) {
  const Section ds = root.Sub("dataset", {"kind", "samples_per_device", "feature_dim",
                                          "num_classes", "heterogeneity", "separation",
                                          "path", "strategy"});
  DatasetSpec& d = cfg.dataset;
  const std::string kind = ds.String("kind", "synthetic");
  if (kind == "synthetic") {
    d.kind = DatasetSpec::Kind::kSynthetic;
    d.samples_per_device = static_cast<int>(ds.Int("samples_per_device", 50));
    d.feature_dim = static_cast<int>(ds.Int("feature_dim", 10));
    d.num_classes = static_cast<int>(ds.Int("num_classes", 2));
    d.heterogeneity = ds.Double("heterogeneity", 0.5);
    d.separation = ds.Double("separation", 1.0);
    if (d.samples_per_device < 1) {
      throw ConfigError(ds.Field("samples_per_device"), "must be positive", ErrorCode::kZeroSamples);
    }
    if (d.feature_dim < 1) throw ConfigError(ds.Field("feature_dim"), "must be positive");
    if (d.num_classes < 1) throw ConfigError(ds.Field("num_classes"), "must be positive");
    if (!(d.heterogeneity >= 0 && d.heterogeneity <= 1)) {
      throw ConfigError(ds.Field("heterogeneity"), "must lie in [0, 1]",
                        ErrorCode::kInvalidHeterogeneity);
    }
  } else if (kind == "csv") {
    d.kind = DatasetSpec::Kind::kCsv;
    d.path = ds.String("path");
    const std::string strategy = ds.String("strategy", "iid");
    if (strategy == "iid") {
      d.strategy = PartitionStrategy::kIid;
    } else if (strategy == "by_label") {
      d.strategy = PartitionStrategy::kByLabel;
    } else {
      throw ConfigError(ds.Field("strategy"), "expected \"iid\" or \"by_label\"");
    }
  } else {
    throw ConfigError(ds.Field("kind"), "expected \"synthetic\" or \"csv\"");
  }
}

void ParseLoss(const Section& root, ExperimentConfig& cfg) {
  const Section loss = root.Sub("loss", {"kind", "lambda", "clip_norm"});
  const std::string kind = loss.String("kind", "logistic");
  if (kind == "logistic") {
    cfg.loss.kind = LossKind::kLogistic;
  } else if (kind == "ridge" || kind == "ridge_regression") {
    cfg.loss.kind = LossKind::kRidge;
  } else if (kind == "hinge" || kind == "hinge_svm") {
    cfg.loss.kind = LossKind::kHinge;
  } else {
    throw ConfigError(loss.Field("kind"), "expected logistic, ridge or hinge");
  }
  cfg.loss.lambda = loss.Double("lambda", 0.0);
  cfg.loss.clip_norm = loss.Double("clip_norm", 1.0);
  if (!(cfg.loss.lambda >= 0)) throw ConfigError(loss.Field("lambda"), "must be non-negative");
  if (!(cfg.loss.clip_norm > 0) || !std::isfinite(cfg.loss.clip_norm)) {
    throw ConfigError(loss.Field("clip_norm"), "must be positive and finite");
  }
}

void ParseSchedule(const Section& root, ExperimentConfig& cfg) {
  const Section sch = root.Sub("schedule", {"T", "K", "local_aggregation",
                                            "local_aggregation_sets", "gamma", "step_kind"});
  sch.Require("T");
  cfg.T = static_cast<int>(sch.Int("T"));
  cfg.K = sch.Has("K") ? IntList(sch, "K") : std::vector<int>{1};
  const int L = static_cast<int>(cfg.layers.size());
  auto layer_key = [&](const std::string& field, const std::string& key) {
    int layer = 0;
    try {
      std::size_t pos = 0;
      layer = std::stoi(key, &pos);
      if (pos != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError(field + "." + key, "keys are layer numbers");
    }
    if (layer < 1 || layer > L - 1) {
      throw ConfigError(field + "." + key, "local aggregation layers lie in [1, L-1]",
                        ErrorCode::kInvalidLayer);
    }
    return layer;
  };
  if (sch.Has("local_aggregation")) {
    const json& p = sch.Raw("local_aggregation");
    if (!p.is_object()) throw ConfigError(sch.Field("local_aggregation"), "expected an object");
    for (const auto& [key, value] : p.items()) {
      const int layer = layer_key(sch.Field("local_aggregation"), key);
      cfg.periods[layer] = static_cast<int>(
          Section::AsInt(value, sch.Field("local_aggregation") + "." + key));
    }
  }
  if (sch.Has("local_aggregation_sets")) {
    const json& p = sch.Raw("local_aggregation_sets");
    if (!p.is_object()) {
      throw ConfigError(sch.Field("local_aggregation_sets"), "expected an object");
    }
    for (const auto& [key, value] : p.items()) {
      const std::string field = sch.Field("local_aggregation_sets") + "." + key;
      const int layer = layer_key(sch.Field("local_aggregation_sets"), key);
      if (!value.is_array()) throw ConfigError(field, "expected a list of iterations");
      std::vector<int> set;
      for (const auto& x : value) set.push_back(static_cast<int>(Section::AsInt(x, field)));
      cfg.sets[layer] = set;
    }
  }
  if (sch.Has("gamma")) {
    const json& g = sch.Raw("gamma");
    if (g.is_string() && g == "auto") {
      cfg.gamma.reset();
    } else if (g.is_number() && g.get<double>() > 0) {
      cfg.gamma = g.get<double>();
    } else {
      throw ConfigError(sch.Field("gamma"), "expected \"auto\" or a positive number");
    }
  }
  const std::string step = sch.String("step_kind", "decay");
  if (step == "decay") {
    cfg.step = StepKind::kDecay;
  } else if (step == "constant") {
    cfg.step = StepKind::kConstant;
  } else {
    throw ConfigError(sch.Field("step_kind"), "expected \"decay\" or \"constant\"");
  }
  try {
    (void)BuildSchedule(cfg.T, cfg.K, cfg.periods, cfg.sets);
  } catch (const Error& e) {
    std::string field = sch.Field("K");
    if (e.code() == ErrorCode::kOverlappingAggregationSets ||
        e.code() == ErrorCode::kZeroInterval) {
      field = sch.Field(cfg.sets.empty() ? "local_aggregation" : "local_aggregation_sets");
      if (e.code() == ErrorCode::kZeroInterval &&
          std::any_of(cfg.K.begin(), cfg.K.end(), [](int k) { return k < 1; })) {
        field = sch.Field("K");
      }
    } else if (cfg.T < 1) {
      field = sch.Field("T");
    }
    throw ConfigError(field, e.what(), e.code());
  }
}

void ParseDp(const Section& root, ExperimentConfig& cfg) {
  const Section dp = root.Sub("dp", {"epsilon", "delta", "q", "alphas", "alpha_policy", "c1"});
  cfg.dp.epsilon = dp.Double("epsilon");
  cfg.dp.delta = dp.Double("delta", 1e-5);
  cfg.dp.q = dp.Double("q", 0.1);
  cfg.dp.c1 = dp.Double("c1", 1.0);
  cfg.dp.T = cfg.T;
  if (dp.Has("alphas")) {
    cfg.dp.alphas = DoubleList(dp, "alphas");
    if (cfg.dp.alphas.size() != cfg.layers.size()) {
      throw ConfigError(dp.Field("alphas"), "need one alpha per layer 1..L");
    }
  }
  const std::string policy = dp.String("alpha_policy", "composed");
  if (policy == "composed") {
    cfg.alpha_policy = AlphaPolicy::kComposed;
  } else if (policy == "uniform") {
    cfg.alpha_policy = AlphaPolicy::kUniform;
  } else {
    throw ConfigError(dp.Field("alpha_policy"), "expected \"composed\" or \"uniform\"");
  }
  try {
    cfg.dp.Validate();
  } catch (const Error& e) {
    std::string field = "dp";
    switch (e.code()) {
      case ErrorCode::kAccountantPremiseViolated: field = dp.Field("epsilon"); break;
      case ErrorCode::kInvalidQ: field = dp.Field("q"); break;
      default:
        if (!(cfg.dp.epsilon > 0)) field = dp.Field("epsilon");
        else if (!(cfg.dp.delta > 0 && cfg.dp.delta < 1)) field = dp.Field("delta");
        else if (!(cfg.dp.c1 > 0)) field = dp.Field("c1");
        else field = dp.Field("alphas");
    }
    throw ConfigError(field, e.what(), e.code());
  }
}

void ParseControl(const Section& root, ExperimentConfig& cfg) {
  const Section ctl = root.Sub("control", {"enabled", "weights", "tau", "K_max", "sweep"});
  cfg.control.enabled = ctl.Bool("enabled", false);
  auto weights_from = [&](const json& w, const std::string& field) {
    ObjectiveWeights out;
    if (w.is_array() && w.size() == 3 && w[0].is_number() && w[1].is_number() &&
        w[2].is_number()) {
      out = {w[0].get<double>(), w[1].get<double>(), w[2].get<double>()};
    } else if (w.is_object()) {
      const Section s(&w, field, {"energy", "delay", "gap"});
      out = {s.Double("energy", 0.0), s.Double("delay", 0.0), s.Double("gap", 0.0)};
    } else {
      throw ConfigError(field, "expected [energy, delay, gap] or an object");
    }
    if (out.energy < 0 || out.delay < 0 || out.gap < 0 ||
        (out.energy == 0 && out.delay == 0 && out.gap == 0)) {
      throw ConfigError(field, "weights must be non-negative and not all zero");
    }
    return out;
  };
  if (ctl.Has("weights")) cfg.control.weights = weights_from(ctl.Raw("weights"), ctl.Field("weights"));
  const int k_max = *std::max_element(cfg.K.begin(), cfg.K.end());
  cfg.control.k_max = static_cast<int>(ctl.Int("K_max", k_max));
  cfg.control.tau = static_cast<int>(ctl.Int("tau", static_cast<long long>(cfg.T) * cfg.control.k_max));
  if (cfg.control.k_max < 1) throw ConfigError(ctl.Field("K_max"), "must be at least 1");
  if (cfg.control.tau <= cfg.T) {
    throw ConfigError(ctl.Field("tau"), "tau must exceed the number of rounds T");
  }
  if (cfg.control.enabled) {
    try {
      (void)BuildSchedule(cfg.T, {std::max(cfg.control.k_max, k_max)}, cfg.periods, cfg.sets);
    } catch (const Error& e) {
      throw ConfigError(ctl.Field("K_max"), e.what(), e.code());
    }
  }
  const Section sweep = ctl.Sub("sweep", {"energy", "delay", "gap", "e_iter"});
  auto axis = [&](const std::string& key, std::vector<double> fallback) {
    return sweep.Has(key) ? DoubleList(sweep, key) : fallback;
  };
  const auto we = axis("energy", {0.0, 1.0, 10.0, 100.0});
  const auto wd = axis("delay", {0.0, 1.0, 10.0});
  const auto wg = axis("gap", {0.0, 1.0, 10.0});
  for (double e : we) {
    for (double d : wd) {
      for (double g : wg) {
        if (e < 0 || d < 0 || g < 0) throw ConfigError(ctl.Field("sweep"), "weights must be non-negative");
        if (e == 0 && d == 0 && g == 0) continue;
        cfg.sweep_weights.push_back({e, d, g});
      }
    }
  }
  if (sweep.Has("e_iter")) cfg.sweep_e_iter = DoubleList(sweep, "e_iter");
}

void ParseCost(const Section& root, ExperimentConfig& cfg) {
  const Section cost = root.Sub("cost", {"device_power_dBm", "cloud_power_dBm", "device_rate_bps",
                                         "cloud_rate_bps", "bits_per_param", "e_iter",
                                         "gamma_iter"});
  CostModel& c = cfg.cost;
  c.device_power_w = DbmToWatts(cost.Double("device_power_dBm", 24.0));
  c.cloud_power_w = DbmToWatts(cost.Double("cloud_power_dBm", 38.0));
  c.device_rate_bps = cost.Double("device_rate_bps", 35e6);
  c.cloud_rate_bps = cost.Double("cloud_rate_bps", 100e6);
  c.bits_per_param = cost.Double("bits_per_param", 32);
  c.e_iter = cost.Double("e_iter", 1e-3);
  c.gamma_iter = cost.Double("gamma_iter", 0.2);
  try {
    c.Validate();
  } catch (const Error& e) {
    throw ConfigError("cost", e.what(), e.code());
  }
}

}  // namespace

ExperimentConfig ParseConfig(std::string_view json_text, const ConfigOverrides& overrides) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "the config must be a JSON object");
  if (overrides.seed) doc["seed"] = *overrides.seed;
  if (overrides.protocol) doc["protocol"] = *overrides.protocol;
  if (overrides.output_dir) doc["output"]["dir"] = *overrides.output_dir;

  ExperimentConfig cfg;
  cfg.source_json = doc.dump();
  const Section root(&doc, "", {"name", "seed", "protocol", "workers", "topology", "dataset",
                                "loss", "model", "dp", "schedule", "control", "cost", "output"});
  cfg.name = root.String("name", "");
  if (root.Has("seed")) {
    const json& s = root.Raw("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0)) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  const std::string protocol = root.String("protocol", "m2fdp");
  const auto parsed = ParseProtocol(protocol);
  if (!parsed) {
    throw ConfigError("protocol", "expected m2fdp, hfl_no_dp, hfl_dp_ldp or pedpfl_star");
  }
  cfg.protocol = *parsed;
  cfg.workers = static_cast<int>(root.Int("workers", 1));
  if (cfg.workers < 1) throw ConfigError("workers", "must be at least 1");

  ParseTopology(root, cfg);
  ParseDataset(root, cfg);
  ParseLoss(root, cfg);
  const Section model = root.Sub("model", {"init_scale"});
  cfg.init_scale = model.Double("init_scale", 0.0);
  if (!(cfg.init_scale >= 0)) throw ConfigError("model.init_scale", "must be non-negative");
  ParseSchedule(root, cfg);
  ParseDp(root, cfg);
  ParseControl(root, cfg);
  ParseCost(root, cfg);
  const Section out = root.Sub("output", {"dir"});
  cfg.output_dir = out.String("dir", "out");
  return cfg;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig LoadConfig(const std::string& path, const ConfigOverrides& overrides) {
  return ParseConfig(ReadFile(path), overrides);
}

void WriteFileAtomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot move " + tmp.string() + ": " + ec.message());
}

TierTopology BuildConfiguredTopology(const ExperimentConfig& config) {
  return BuildTopology(config.layers, config.trust, config.cloud_secure);
}

FederatedDataset BuildConfiguredDataset(const ExperimentConfig& config) {
  const int devices = config.layers.back();
  const DatasetSpec& d = config.dataset;
  if (d.kind == DatasetSpec::Kind::kCsv) return PartitionCsv(d.path, devices, d.strategy);
  return GenerateSynthetic(devices, d.samples_per_device, d.feature_dim, d.num_classes,
                           d.heterogeneity, config.seed, d.separation);
}

TierTopology AnalyticTopology(Protocol protocol, const TierTopology& topology) {
  std::vector<int> sizes(topology.layer_sizes().begin() + 1, topology.layer_sizes().end());
  switch (protocol) {
    case Protocol::kM2fdp: return topology;
    case Protocol::kPedpflStar: return StarTopology(topology.num_devices());
    case Protocol::kHflNoDp: {
      TrustAssignment all;
      for (int l = 1; l < topology.num_layers(); ++l) {
        for (int c = 0; c < topology.layer_size(l); ++c) all[{l, c}] = Trust::kSecure;
      }
      return BuildTopology(sizes, all, true);
    }
    case Protocol::kHflDpLdp: return BuildTopology(sizes, {}, false);
  }
  return topology;
}

std::vector<double> ResolveAlphas(const ExperimentConfig& config, const TierTopology& topology) {
  const int L = topology.num_layers();
  if (!config.dp.alphas.empty()) {
    if (static_cast<int>(config.dp.alphas.size()) == L) return config.dp.alphas;
    if (L == 1) return {config.dp.alphas.back()};
  }
  if (config.alpha_policy == AlphaPolicy::kUniform) return std::vector<double>(L, 1.0);
  return ComposedAlphas(topology);
}

TrainingSetup MakeSetup(const ExperimentConfig& config) {
  TrainingSetup s;
  s.seed = config.seed;
  s.protocol = config.protocol;
  s.workers = config.workers;
  auto topo = std::make_shared<const TierTopology>(BuildConfiguredTopology(config));
  s.topology = topo;
  s.dataset = std::make_shared<const FederatedDataset>(BuildConfiguredDataset(config));
  s.loss = config.loss;
  s.dp = config.dp;
  s.dp.T = config.T;
  s.dp.alphas = ResolveAlphas(config, *topo);
  s.schedule = BuildSchedule(config.T, config.K, config.periods, config.sets);
  s.gamma = config.gamma;
  s.step = config.step;
  s.control = config.control;
  s.cost = config.cost;
  s.init_scale = config.init_scale;
  return s;
}

Summary Summarize(const std::vector<TraceRow>& trace) {
  Summary s;
  if (trace.empty()) return s;
  const TraceRow& last = trace.back();
  s.rounds = last.t;
  s.k_total = last.k_total;
  s.final_loss = last.global_loss;
  s.final_grad_norm = last.global_grad_norm;
  s.total_energy_J = last.energy_J;
  s.total_delay_s = last.delay_s;
  s.total_noise_draws = last.noise_draws;
  s.min_loss = trace.front().global_loss;
  for (const auto& r : trace) s.min_loss = std::min(s.min_loss, r.global_loss);
  const int rounds = static_cast<int>(trace.size()) - 1;
  if (rounds > 0) {
    const int window = (rounds + 3) / 4;
    double sum = 0;
    for (int i = static_cast<int>(trace.size()) - window; i < static_cast<int>(trace.size()); ++i) {
      sum += trace[i].global_grad_norm;
    }
    s.plateau_grad_norm = sum / window;
  } else {
    s.plateau_grad_norm = last.global_grad_norm;
  }
  return s;
}

namespace {

BoundReport ReportFor(const ExperimentConfig& config, const TierTopology& topo, int model_dim,
                      int k_max, const LossConstants& loss, double drop) {
  const TierTopology analytic = AnalyticTopology(config.protocol, topo);
  DPConfig dp = config.dp;
  dp.T = config.T;
  dp.alphas = ResolveAlphas(config, analytic);
  return MakeBoundReport(DeriveTrustStats(analytic), dp, model_dim, k_max, loss, drop);
}

int ConfiguredKMax(const ExperimentConfig& config) {
  int k = *std::max_element(config.K.begin(), config.K.end());
  if (config.control.enabled) k = std::max(k, config.control.k_max);
  return k;
}

}  // namespace

ExperimentArtifacts RunExperiment(const ExperimentConfig& config) {
  ExperimentArtifacts a;
  a.config = config;
  const TrainingSetup setup = MakeSetup(config);
  a.result = RunTraining(setup);
  a.summary = Summarize(a.result.trace);
  const auto& ds = *setup.dataset;
  const int M = ModelDim(config.loss, ds.feature_dim, ds.num_classes);
  const double drop = a.result.trace.front().global_loss - a.result.trace.back().global_loss;
  a.bound = ReportFor(config, *setup.topology, M, a.result.k_cal,
                      {a.result.beta, config.loss.clip_norm, a.result.sigma2}, drop);
  return a;
}

BoundReport PredictiveBoundReport(const ExperimentConfig& config) {
  const TrainingSetup setup = MakeSetup(config);
  const auto& ds = *setup.dataset;
  const int M = ModelDim(config.loss, ds.feature_dim, ds.num_classes);
  Vec w0(M, 0.0);
  if (config.init_scale > 0) {
    RngStream rng(config.seed, StreamPurpose::kInit, {0});
    for (double& v : w0) v = config.init_scale * rng.Normal();
  }
  const ProbeResult probe = ProbeLossConstants(setup, w0);
  const double f1 = GlobalLoss(config.loss, w0, ds, *setup.topology);
  return ReportFor(config, *setup.topology, M, ConfiguredKMax(config),
                   {probe.beta, config.loss.clip_norm, probe.sigma2}, f1);
}

long double AnalyticGap(const ExperimentConfig& config) {
  const TierTopology topo = BuildConfiguredTopology(config);
  const TierTopology analytic = AnalyticTopology(config.protocol, topo);
  DPConfig dp = config.dp;
  dp.T = config.T;
  dp.alphas = ResolveAlphas(config, analytic);
  int M = 0;
  if (config.dataset.kind == DatasetSpec::Kind::kSynthetic) {
    M = ModelDim(config.loss, config.dataset.feature_dim, config.dataset.num_classes);
  } else {
    const FederatedDataset ds = BuildConfiguredDataset(config);
    M = ModelDim(config.loss, ds.feature_dim, ds.num_classes);
  }
  const TrustStats stats = DeriveTrustStats(analytic);
  return StationarityGap(dp, M, ConfiguredKMax(config), AbcTerms(stats, dp.alphas), stats);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kTraceHeader =
    "t,k_total,eta,K_t,s_secure,s_insecure,global_loss,global_grad_norm,energy_J,delay_s,"
    "noise_draws";

double Finite(long double v) { return static_cast<double>(v); }

}  // namespace

std::string TraceCsv(const std::vector<TraceRow>& trace) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const auto& r : trace) {
    out += std::to_string(r.t) + ',' + std::to_string(r.k_total) + ',' + FormatDouble(r.eta) +
           ',' + std::to_string(r.K_t) + ',' + std::to_string(r.s_secure) + ',' +
           std::to_string(r.s_insecure) + ',' + FormatDouble(r.global_loss) + ',' +
           FormatDouble(r.global_grad_norm) + ',' + FormatDouble(r.energy_J) + ',' +
           FormatDouble(r.delay_s) + ',' + std::to_string(r.noise_draws) + '\n';
  }
  return out;
}

std::vector<TraceRow> ParseTraceCsv(std::string_view text) {
  std::vector<TraceRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != kTraceHeader) throw Error(ErrorCode::kMalformedRow, "unexpected trace header");
      continue;
    }
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    TraceRow r;
    if (!(ss >> r.t >> r.k_total >> r.eta >> r.K_t >> r.s_secure >> r.s_insecure >>
          r.global_loss >> r.global_grad_norm >> r.energy_J >> r.delay_s >> r.noise_draws)) {
      throw Error(ErrorCode::kMalformedRow, "trace line " + std::to_string(line_no));
    }
    rows.push_back(r);
  }
  return rows;
}

std::string BoundReportJson(const BoundReport& r) {
  ordered_json j;
  j["inputs"] = {{"L", r.num_layers},
                 {"M", r.model_dim},
                 {"K_max", r.k_max},
                 {"q", r.dp.q},
                 {"epsilon", r.dp.epsilon},
                 {"delta", r.dp.delta},
                 {"T", r.dp.T},
                 {"c1", r.dp.c1},
                 {"beta", r.loss.beta},
                 {"G", r.loss.G},
                 {"sigma2", r.loss.sigma2},
                 {"loss_drop", r.loss_drop}};
  j["trust_stats"] = {{"p_min", r.stats.p_min},
                      {"p_max", r.stats.p_max},
                      {"s", r.stats.min_fanout}};
  j["alphas"] = r.alphas;
  ordered_json layers = ordered_json::array();
  for (std::size_t i = 0; i < r.terms.size(); ++i) {
    layers.push_back({{"l", i + 1},
                      {"A", Finite(r.terms[i].a)},
                      {"B", Finite(r.terms[i].b)},
                      {"C", Finite(r.terms[i].c)}});
  }
  j["layers"] = layers;
  j["prefactor"] = Finite(r.prefactor);
  j["weighted_sum"] = Finite(r.weighted_sum);
  j["gap"] = Finite(r.gap);
  if (r.gap > 0) {
    j["gap_log10"] = Finite(std::log10(r.gap));
  } else {
    j["gap_log10"] = nullptr;
  }
  j["a1"] = Finite(r.theorem1.a1);
  j["a2"] = Finite(r.theorem1.a2);
  j["bound"] = Finite(r.theorem1.total());
  j["gamma_max"] = r.gamma_max;
  return j.dump(2) + "\n";
}

std::string SummaryJson(const Summary& s) {
  ordered_json j;
  j["rounds"] = s.rounds;
  j["k_total"] = s.k_total;
  j["final_loss"] = s.final_loss;
  j["final_grad_norm"] = s.final_grad_norm;
  j["plateau_grad_norm"] = s.plateau_grad_norm;
  j["min_loss"] = s.min_loss;
  j["total_energy_J"] = s.total_energy_J;
  j["total_delay_s"] = s.total_delay_s;
  j["total_noise_draws"] = s.total_noise_draws;
  return j.dump(2) + "\n";
}

std::string AuditJson(const std::vector<RoundAudit>& audits) {
  ordered_json arr = ordered_json::array();
  for (const auto& a : audits) {
    ordered_json events = ordered_json::array();
    for (const auto& e : a.events) events.push_back({e.k, e.top_layer});
    arr.push_back({{"t", a.t},
                   {"eta", a.eta},
                   {"k_cal", a.k_cal},
                   {"clip_norm", a.clip_norm},
                   {"participants", a.participants},
                   {"events", events}});
  }
  return arr.dump() + "\n";
}

std::vector<RoundAudit> ParseAuditJson(std::string_view text) {
  std::vector<RoundAudit> out;
  try {
    const json arr = json::parse(text);
    for (const auto& a : arr) {
      RoundAudit r;
      r.t = a.at("t").get<int>();
      r.eta = a.at("eta").get<double>();
      r.k_cal = a.at("k_cal").get<int>();
      r.clip_norm = a.at("clip_norm").get<double>();
      r.participants = a.at("participants").get<std::vector<std::vector<int>>>();
      for (const auto& e : a.at("events")) r.events.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIncompleteLedger, std::string("unreadable round records: ") + e.what());
  }
  return out;
}

void WriteArtifacts(const ExperimentArtifacts& a, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir + ": " + ec.message());
  const std::filesystem::path base(dir);
  std::ostringstream ledger;
  a.result.ledger.WriteCsv(ledger);
  WriteFileAtomic((base / "trace.csv").string(), TraceCsv(a.result.trace));
  WriteFileAtomic((base / "ledger.csv").string(), ledger.str());
  WriteFileAtomic((base / "rounds.json").string(), AuditJson(a.result.ledger.audits()));
  WriteFileAtomic((base / "bound_report.json").string(), BoundReportJson(a.bound));
  WriteFileAtomic((base / "summary.json").string(), SummaryJson(a.summary));
}

// ---------------------------------------------------------------------------
// Comparisons, sweeps, verification

std::optional<CompareAxis> ParseCompareAxis(std::string_view name) {
  if (name == "protocol") return CompareAxis::kProtocol;
  if (name == "p") return CompareAxis::kP;
  if (name == "epsilon") return CompareAxis::kEpsilon;
  if (name == "s") return CompareAxis::kS;
  if (name == "L") return CompareAxis::kL;
  return std::nullopt;
}

namespace {

std::vector<std::string> AxisFields(CompareAxis axis) {
  switch (axis) {
    case CompareAxis::kProtocol: return {"protocol", "topology.secure_ratio", "topology.trust"};
    case CompareAxis::kP: return {"topology.secure_ratio", "topology.trust", "dp.alphas"};
    case CompareAxis::kEpsilon: return {"dp.epsilon"};
    case CompareAxis::kS: return {"topology.layers", "dp.alphas"};
    case CompareAxis::kL:
      return {"topology.layers", "topology.secure_ratio", "topology.trust", "dp.alphas",
              "schedule.local_aggregation", "schedule.local_aggregation_sets"};
  }
  return {};
}

json::json_pointer Pointer(const std::string& dotted) {
  std::string p = "/" + dotted;
  std::replace(p.begin(), p.end(), '.', '/');
  return json::json_pointer(p);
}

}  // namespace

std::vector<CompareRow> CompareRuns(const std::vector<ExperimentConfig>& configs, CompareAxis axis) {
  if (configs.empty()) throw Error(ErrorCode::kAxisMismatch, "no configs to compare");
  const auto fields = AxisFields(axis);
  auto stripped = [&](const ExperimentConfig& c) {
    json j = json::parse(c.source_json);
    j.erase("output");
    j.erase("name");
    j.erase("workers");
    for (const auto& f : fields) {
      const auto ptr = Pointer(f);
      if (j.contains(ptr)) j[ptr.parent_pointer()].erase(ptr.back());
    }
    return j.dump();
  };
  const std::string reference = stripped(configs.front());
  for (std::size_t i = 1; i < configs.size(); ++i) {
    if (stripped(configs[i]) != reference) {
      throw Error(ErrorCode::kAxisMismatch,
                  "config " + std::to_string(i) + " differs from config 0 outside the axis");
    }
  }
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ExperimentConfig& c = configs[i];
    CompareRow row;
    row.label = c.name.empty() ? "run" + std::to_string(i) : c.name;
    row.protocol = std::string(ProtocolName(c.protocol));
    const json j = json::parse(c.source_json);
    for (const auto& f : fields) {
      const auto ptr = Pointer(f);
      if (!j.contains(ptr)) continue;
      if (!row.axis_value.empty()) row.axis_value += ';';
      row.axis_value += f + "=" + j[ptr].dump();
    }
    const ExperimentArtifacts a = RunExperiment(c);
    row.summary = a.summary;
    row.analytic_gap = static_cast<double>(AnalyticGap(c));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string CsvQuote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string CompareCsv(const std::vector<CompareRow>& rows) {
  std::string out =
      "label,protocol,axis_value,final_loss,final_grad_norm,plateau_grad_norm,min_loss,"
      "total_energy_J,total_delay_s,noise_draws,analytic_gap\n";
  for (const auto& r : rows) {
    out += CsvQuote(r.label) + ',' + r.protocol + ',' + CsvQuote(r.axis_value) + ',' +
           FormatDouble(r.summary.final_loss) + ',' + FormatDouble(r.summary.final_grad_norm) +
           ',' + FormatDouble(r.summary.plateau_grad_norm) + ',' +
           FormatDouble(r.summary.min_loss) + ',' + FormatDouble(r.summary.total_energy_J) + ',' +
           FormatDouble(r.summary.total_delay_s) + ',' +
           std::to_string(r.summary.total_noise_draws) + ',' + FormatDouble(r.analytic_gap) +
           '\n';
  }
  return out;
}

std::vector<SweepRow> ConfiguredControlSweep(const ExperimentConfig& config) {
  const TierTopology topo = BuildConfiguredTopology(config);
  int M = 0;
  if (config.dataset.kind == DatasetSpec::Kind::kSynthetic) {
    M = ModelDim(config.loss, config.dataset.feature_dim, config.dataset.num_classes);
  } else {
    const FederatedDataset ds = BuildConfiguredDataset(config);
    M = ModelDim(config.loss, ds.feature_dim, ds.num_classes);
  }
  ControlProblem p;
  p.cost = config.cost;
  p.cost.model_dim = M;
  p.dp = config.dp;
  p.dp.T = config.T;
  p.dp.alphas = ResolveAlphas(config, topo);
  p.topology = &topo;
  p.stats = DeriveTrustStats(topo);
  p.model_dim = M;
  p.k_max = ConfiguredKMax(config);
  const TrainingSchedule sched = BuildSchedule(config.T, config.K, config.periods, config.sets);
  p.ctx = {config.control.tau, static_cast<double>(sched.LocalEvents(1))};
  return ControlSweep(p, config.sweep_weights, config.sweep_e_iter);
}

std::string SweepCsv(const std::vector<SweepRow>& rows) {
  std::string out =
      "w_energy,w_delay,w_gap,e_iter,K,s_secure,s_insecure,objective,energy_J,delay_s,nu\n";
  for (const auto& r : rows) {
    const auto& d = r.decision;
    out += FormatDouble(r.weights.energy) + ',' + FormatDouble(r.weights.delay) + ',' +
           FormatDouble(r.weights.gap) + ',' + FormatDouble(r.e_iter) + ',' +
           std::to_string(d.K) + ',' + std::to_string(d.s_secure) + ',' +
           std::to_string(d.s_insecure) + ',' + FormatDouble(d.objective) + ',' +
           FormatDouble(d.energy) + ',' + FormatDouble(d.delay) + ',' + FormatDouble(d.nu) +
           '\n';
  }
  return out;
}

ProtectionReport VerifyStoredRun(const ExperimentConfig& config, const std::string& run_dir) {
  const TierTopology configured = BuildConfiguredTopology(config);
  const TierTopology topo = config.protocol == Protocol::kPedpflStar
                                ? StarTopology(configured.num_devices())
                                : configured;
  DPConfig dp = config.dp;
  dp.T = config.T;
  dp.alphas = ResolveAlphas(config, topo);
  const std::filesystem::path base(run_dir);
  std::istringstream ledger_text(ReadFile((base / "ledger.csv").string()));
  NoiseLedger ledger = NoiseLedger::ReadCsv(ledger_text);
  const auto audits_path = base / "rounds.json";
  if (!std::filesystem::exists(audits_path)) {
    throw Error(ErrorCode::kIncompleteLedger, "missing " + audits_path.string());
  }
  for (auto& a : ParseAuditJson(ReadFile(audits_path.string()))) ledger.CompleteRound(std::move(a));
  const TrustStats stats = DeriveTrustStats(topo);
  ProtectionReport all;
  for (int t = 1; t <= config.T; ++t) {
    const ProtectionReport r = VerifyNodeProtection(topo, stats, dp, ledger, t);
    all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
  }
  return all;
}

std::string ProtectionJson(const ProtectionReport& report) {
  ordered_json rows = ordered_json::array();
  int failures = 0;
  for (const auto& r : report.rows) {
    failures += r.pass ? 0 : 1;
    rows.push_back({{"t", r.t},
                    {"k", r.k},
                    {"receiver", std::to_string(r.receiver_layer) + ":" + std::to_string(r.receiver_node)},
                    {"sender", std::to_string(r.layer) + ":" + std::to_string(r.node)},
                    {"case", static_cast<int>(r.kase)},
                    {"effective_sigma2", r.effective},
                    {"required_sigma2", r.required},
                    {"pass", r.pass}});
  }
  ordered_json j;
  j["all_pass"] = report.all_pass();
  j["checked"] = report.rows.size();
  j["failures"] = failures;
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

}  // namespace m2fdp
