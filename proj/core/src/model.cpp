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

#include "m2fdp/model.hpp"

#include <algorithm>
#include <cmath>

#include "m2fdp/error.hpp"

namespace m2fdp {

namespace {

bool IsMulticlass(const LossSpec& spec, int num_classes) {
  return spec.kind != LossKind::kRidge && num_classes > 2;
}

// Numerically stable log(1 + exp(z)).
double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void CheckDims(std::size_t w, int expected) {
  if (static_cast<int>(w) != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                "model has dimension " + std::to_string(w) + ", expected " +
                    std::to_string(expected));
  }
}

}  // namespace

int ModelDim(const LossSpec& spec, int feature_dim, int num_classes) {
  return IsMulticlass(spec, num_classes) ? feature_dim * num_classes : feature_dim;
}

double PointLoss(const LossSpec& spec, std::span<const double> w,
                 std::span<const double> x, int label, int num_classes) {
  const double reg = 0.5 * spec.lambda * Dot(w, w);
  const std::size_t d = x.size();
  if (!IsMulticlass(spec, num_classes)) {
    const double z = Dot(w.first(d), x);
    switch (spec.kind) {
      case LossKind::kRidge: {
        const double r = z - label;
        return 0.5 * r * r + reg;
      }
      case LossKind::kLogistic: {
        const double y = label == 1 ? 1.0 : -1.0;
        return Softplus(-y * z) + reg;
      }
      case LossKind::kHinge: {
        const double y = label == 1 ? 1.0 : -1.0;
        return std::max(0.0, 1.0 - y * z) + reg;
      }
    }
  }
  std::vector<double> scores(num_classes);
  for (int k = 0; k < num_classes; ++k) scores[k] = Dot(w.subspan(k * d, d), x);
  if (spec.kind == LossKind::kLogistic) {
    const double top = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - top);
    return top + std::log(sum) - scores[label] + reg;
  }
  double worst = -INFINITY;
  for (int k = 0; k < num_classes; ++k) {
    if (k != label) worst = std::max(worst, scores[k]);
  }
  return std::max(0.0, 1.0 + worst - scores[label]) + reg;
}

void AccumulatePointGradient(const LossSpec& spec, std::span<const double> w,
                             std::span<const double> x, int label,
                             int num_classes, double scale,
                             std::span<double> grad) {
  Axpy(scale * spec.lambda, w, grad);
  const std::size_t d = x.size();
  if (!IsMulticlass(spec, num_classes)) {
    const double z = Dot(w.first(d), x);
    double coeff = 0.0;
    switch (spec.kind) {
      case LossKind::kRidge:
        coeff = z - label;
        break;
      case LossKind::kLogistic: {
        const double y = label == 1 ? 1.0 : -1.0;
        coeff = -y * Sigmoid(-y * z);
        break;
      }
      case LossKind::kHinge: {
        const double y = label == 1 ? 1.0 : -1.0;
        // At the kink the zero subgradient is taken.
        coeff = (1.0 - y * z > 0.0) ? -y : 0.0;
        break;
      }
    }
    Axpy(scale * coeff, x, grad.first(d));
    return;
  }
  std::vector<double> scores(num_classes);
  for (int k = 0; k < num_classes; ++k) scores[k] = Dot(w.subspan(k * d, d), x);
  if (spec.kind == LossKind::kLogistic) {
    const double top = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double& s : scores) {
      s = std::exp(s - top);
      sum += s;
    }
    for (int k = 0; k < num_classes; ++k) {
      const double coeff = scores[k] / sum - (k == label ? 1.0 : 0.0);
      Axpy(scale * coeff, x, grad.subspan(k * d, d));
    }
    return;
  }
  int worst = -1;
  for (int k = 0; k < num_classes; ++k) {
    if (k != label && (worst < 0 || scores[k] > scores[worst])) worst = k;
  }
  if (1.0 + scores[worst] - scores[label] > 0.0) {
    Axpy(scale, x, grad.subspan(worst * d, d));
    Axpy(-scale, x, grad.subspan(label * d, d));
  }
}

double LocalLoss(const LossSpec& spec, std::span<const double> w,
                 const FederatedDataset& dataset, int device) {
  CheckDims(w.size(), ModelDim(spec, dataset.feature_dim, dataset.num_classes));
  const int n = dataset.devices.at(device).size();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    sum += PointLoss(spec, w, dataset.row(device, i), dataset.label(device, i),
                     dataset.num_classes);
  }
  return sum / n;
}

Vec LocalGradient(const LossSpec& spec, std::span<const double> w,
                  const FederatedDataset& dataset, int device) {
  CheckDims(w.size(), ModelDim(spec, dataset.feature_dim, dataset.num_classes));
  const int n = dataset.devices.at(device).size();
  Vec g(w.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    AccumulatePointGradient(spec, w, dataset.row(device, i),
                            dataset.label(device, i), dataset.num_classes,
                            1.0 / n, g);
  }
  return g;
}

double IntermediateLoss(const LossSpec& spec, std::span<const double> w,
                        const FederatedDataset& dataset,
                        const TierTopology& topology, int layer, int node) {
  if (topology.num_devices() != dataset.num_devices()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "topology and dataset disagree on the device count");
  }
  if (layer == topology.num_layers()) return LocalLoss(spec, w, dataset, node);
  const auto kids = topology.children(layer, node);
  double sum = 0.0;
  for (int kid : kids) {
    sum += IntermediateLoss(spec, w, dataset, topology, layer + 1, kid);
  }
  return sum / kids.size();
}

double GlobalLoss(const LossSpec& spec, std::span<const double> w,
                  const FederatedDataset& dataset, const TierTopology& topology) {
  return IntermediateLoss(spec, w, dataset, topology, 0, 0);
}

std::vector<double> DeviceWeights(const TierTopology& topology) {
  std::vector<double> weight = {1.0};
  for (int l = 0; l < topology.num_layers(); ++l) {
    std::vector<double> next(topology.layer_size(l + 1), 0.0);
    for (int c = 0; c < topology.layer_size(l); ++c) {
      const auto kids = topology.children(l, c);
      for (int kid : kids) next[kid] = weight[c] / kids.size();
    }
    weight = std::move(next);
  }
  return weight;
}

Vec GlobalGradient(const LossSpec& spec, std::span<const double> w,
                   const FederatedDataset& dataset, const TierTopology& topology) {
  if (topology.num_devices() != dataset.num_devices()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "topology and dataset disagree on the device count");
  }
  const auto weights = DeviceWeights(topology);
  Vec g(w.size(), 0.0);
  for (int j = 0; j < dataset.num_devices(); ++j) {
    Axpy(weights[j], LocalGradient(spec, w, dataset, j), g);
  }
  return g;
}

void ClipToNorm(std::span<double> g, double max_norm) {
  const double n = Norm(g);
  if (n > max_norm && n > 0.0) Scale(max_norm / n, g);
}

Vec StochasticGradient(const LossSpec& spec, std::span<const double> w,
                       const FederatedDataset& dataset, const Minibatch& batch) {
  if (batch.indices.empty()) {
    throw Error(ErrorCode::kEmptyBatch, "stochastic gradient of an empty batch");
  }
  CheckDims(w.size(), ModelDim(spec, dataset.feature_dim, dataset.num_classes));
  Vec g(w.size(), 0.0);
  const double scale = 1.0 / batch.indices.size();
  for (int i : batch.indices) {
    AccumulatePointGradient(spec, w, dataset.row(batch.device, i),
                            dataset.label(batch.device, i), dataset.num_classes,
                            scale, g);
  }
  ClipToNorm(g, spec.clip_norm);
  return g;
}

double EstimateBeta(const std::vector<std::pair<Vec, Vec>>& iterate_trace) {
  double best = 0.0;
  bool any = false;
  for (std::size_t i = 1; i < iterate_trace.size(); ++i) {
    const double dw = Norm(Sub(iterate_trace[i].first, iterate_trace[i - 1].first));
    if (dw == 0.0) continue;
    const double dg = Norm(Sub(iterate_trace[i].second, iterate_trace[i - 1].second));
    best = std::max(best, dg / dw);
    any = true;
  }
  if (!any) {
    throw Error(ErrorCode::kDegenerateTrace,
                "beta estimation needs at least two distinct iterates");
  }
  return std::max(best, kBetaFloor);
}

}  // namespace m2fdp
