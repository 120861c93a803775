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

#ifndef M2FDP_DATASET_HPP_
#define M2FDP_DATASET_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "m2fdp/rng.hpp"

namespace m2fdp {

// One device's local data. Features are stored row-major.
struct DeviceData {
  std::vector<double> features;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
};

struct FederatedDataset {
  int feature_dim = 0;
  int num_classes = 0;
  std::vector<DeviceData> devices;

  int num_devices() const { return static_cast<int>(devices.size()); }
  std::span<const double> row(int device, int index) const {
    return std::span<const double>(devices[device].features)
        .subspan(static_cast<std::size_t>(index) * feature_dim, feature_dim);
  }
  int label(int device, int index) const {
    return devices[device].labels[index];
  }
};

struct Minibatch {
  int device = 0;
  std::vector<int> indices;
  double q = 1.0;
};

// Gaussian blobs with unit covariance. Class means are drawn once per seed
// with scale `separation`. Device j draws labels from
// (1 - h) * uniform + h * onehot(j mod C).
FederatedDataset GenerateSynthetic(int num_devices, int samples_per_device,
                                   int feature_dim, int num_classes,
                                   double heterogeneity, std::uint64_t seed,
                                   double separation = 1.0);

enum class PartitionStrategy { kIid, kByLabel };

// Reads `label,f_1,...,f_d` rows. Blank lines are skipped.
FederatedDataset PartitionCsv(const std::string& path, int num_devices,
                              PartitionStrategy strategy);

// Poisson subsampling: each point is kept independently with probability q.
Minibatch SampleMinibatch(const FederatedDataset& dataset, int device,
                          double q, RngStream& rng);

}  // namespace m2fdp

#endif  // M2FDP_DATASET_HPP_
