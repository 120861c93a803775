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

#include "m2fdp/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "m2fdp/error.hpp"
#include "m2fdp/topology.hpp"

namespace m2fdp {

FederatedDataset GenerateSynthetic(int num_devices, int samples_per_device,
                                   int feature_dim, int num_classes,
                                   double heterogeneity, std::uint64_t seed,
                                   double separation) {
  if (!(heterogeneity >= 0.0 && heterogeneity <= 1.0)) {
    throw Error(ErrorCode::kInvalidHeterogeneity,
                "heterogeneity must lie in [0, 1]");
  }
  if (num_devices <= 0 || samples_per_device <= 0) {
    throw Error(ErrorCode::kZeroSamples,
                "devices and samples per device must be positive");
  }
  if (feature_dim <= 0 || num_classes <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature_dim and num_classes must be positive");
  }

  FederatedDataset ds;
  ds.feature_dim = feature_dim;
  ds.num_classes = num_classes;

  RngStream mean_rng(seed, StreamPurpose::kData, {0});
  std::vector<double> means(static_cast<std::size_t>(num_classes) * feature_dim);
  for (double& m : means) m = separation * mean_rng.Normal();

  const double uniform_share = (1.0 - heterogeneity) / num_classes;
  ds.devices.resize(num_devices);
  for (int j = 0; j < num_devices; ++j) {
    RngStream rng(seed, StreamPurpose::kData, {1, static_cast<std::uint64_t>(j)});
    const int dominant = j % num_classes;
    std::vector<double> weights(num_classes, uniform_share);
    weights[dominant] += heterogeneity;
    std::discrete_distribution<int> pick(weights.begin(), weights.end());

    DeviceData& dev = ds.devices[j];
    dev.labels.resize(samples_per_device);
    dev.features.resize(static_cast<std::size_t>(samples_per_device) * feature_dim);
    for (int i = 0; i < samples_per_device; ++i) {
      const int y = pick(rng.engine());
      dev.labels[i] = y;
      for (int f = 0; f < feature_dim; ++f) {
        dev.features[static_cast<std::size_t>(i) * feature_dim + f] =
            means[static_cast<std::size_t>(y) * feature_dim + f] + rng.Normal();
      }
    }
  }
  return ds;
}

namespace {

struct CsvRow {
  int label;
  std::vector<double> features;
};

std::vector<CsvRow> ReadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<CsvRow> rows;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(cell.c_str(), &end);
      while (end && (*end == ' ' || *end == '\t')) ++end;
      if (cell.empty() || errno != 0 || end == cell.c_str() || *end != '\0' ||
          !std::isfinite(v)) {
        throw Error(ErrorCode::kMalformedRow,
                    "line " + std::to_string(line_no) + ": bad value '" + cell + "'");
      }
      cells.push_back(v);
    }
    if (!line.empty() && line.back() == ',') cells.push_back(NAN);
    if (cells.size() < 2 || (width != 0 && cells.size() != width) ||
        std::isnan(cells.back())) {
      throw Error(ErrorCode::kMalformedRow,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(width ? width : 2) + " columns, got " +
                      std::to_string(cells.size()));
    }
    width = cells.size();
    const double label = cells[0];
    if (label < 0 || label != std::floor(label)) {
      throw Error(ErrorCode::kMalformedRow,
                  "line " + std::to_string(line_no) +
                      ": label must be a non-negative integer");
    }
    rows.push_back({static_cast<int>(label), {cells.begin() + 1, cells.end()}});
  }
  return rows;
}

}  // namespace

FederatedDataset PartitionCsv(const std::string& path, int num_devices,
                              PartitionStrategy strategy) {
  if (num_devices <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "num_devices must be positive");
  }
  std::vector<CsvRow> rows = ReadCsv(path);
  if (static_cast<int>(rows.size()) < num_devices) {
    throw Error(ErrorCode::kTooFewRows,
                std::to_string(rows.size()) + " rows for " +
                    std::to_string(num_devices) + " devices");
  }

  FederatedDataset ds;
  ds.feature_dim = static_cast<int>(rows[0].features.size());
  int max_label = 0;
  for (const auto& r : rows) max_label = std::max(max_label, r.label);
  ds.num_classes = max_label + 1;
  ds.devices.resize(num_devices);

  auto push = [&](int device, const CsvRow& r) {
    DeviceData& dev = ds.devices[device];
    dev.labels.push_back(r.label);
    dev.features.insert(dev.features.end(), r.features.begin(), r.features.end());
  };

  if (strategy == PartitionStrategy::kIid) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      push(static_cast<int>(i % num_devices), rows[i]);
    }
  } else {
    std::vector<int> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return rows[a].label < rows[b].label; });
    const auto shards = EvenSplit(num_devices, static_cast<int>(rows.size()));
    for (int d = 0; d < num_devices; ++d) {
      for (int pos : shards[d]) push(d, rows[order[pos]]);
    }
  }
  return ds;
}

Minibatch SampleMinibatch(const FederatedDataset& dataset, int device, double q,
                          RngStream& rng) {
  if (!(q > 0.0 && q <= 1.0)) {
    throw Error(ErrorCode::kInvalidQ, "sampling ratio q must lie in (0, 1]");
  }
  Minibatch batch;
  batch.device = device;
  batch.q = q;
  const int n = dataset.devices.at(device).size();
  for (int attempt = 0; attempt < 2 && batch.indices.empty(); ++attempt) {
    for (int i = 0; i < n; ++i) {
      if (q >= 1.0 || rng.Uniform() < q) batch.indices.push_back(i);
    }
  }
  if (batch.indices.empty()) {
    batch.indices.push_back(static_cast<int>(rng.Index(n)));
  }
  return batch;
}

}  // namespace m2fdp
