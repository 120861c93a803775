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

#include "m2fdp/topology.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "m2fdp/error.hpp"

namespace m2fdp {

std::vector<std::vector<int>> EvenSplit(int num_parents, int num_children) {
  std::vector<std::vector<int>> out(num_parents);
  const int base = num_children / num_parents;
  const int remainder = num_children % num_parents;
  int next = 0;
  for (int c = 0; c < num_parents; ++c) {
    const int extra = (c >= num_parents - remainder) ? 1 : 0;
    for (int i = 0; i < base + extra; ++i) out[c].push_back(next++);
  }
  return out;
}

int TierTopology::AncestorAt(int layer_of_node, int node,
                             int target_layer) const {
  int current = node;
  for (int l = layer_of_node; l > target_layer; --l) {
    current = parents_[l][current];
  }
  return current;
}

int TierTopology::ancestor_of(int device, int layer) const {
  const int L = num_layers();
  if (layer < 1 || layer > L - 1) {
    throw Error(ErrorCode::kInvalidLayer,
                "ancestor layer " + std::to_string(layer) +
                    " outside [1, " + std::to_string(L - 1) + "]");
  }
  if (device < 0 || device >= num_devices()) {
    throw Error(ErrorCode::kUnknownDevice,
                "unknown device " + std::to_string(device));
  }
  return AncestorAt(L, device, layer);
}

TierTopology BuildTopology(const std::vector<int>& layer_sizes,
                           const TrustAssignment& trust_assignment,
                           bool cloud_secure,
                           const std::optional<ChildMap>& children) {
  if (layer_sizes.empty()) {
    throw Error(ErrorCode::kEmptyLayer, "topology needs at least one layer");
  }
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (layer_sizes[i] <= 0) {
      throw Error(ErrorCode::kEmptyLayer,
                  "layer " + std::to_string(i + 1) + " has no nodes");
    }
  }

  TierTopology topo;
  topo.layer_sizes_.push_back(1);
  topo.layer_sizes_.insert(topo.layer_sizes_.end(), layer_sizes.begin(),
                           layer_sizes.end());
  const int L = topo.num_layers();

  if (children) {
    if (static_cast<int>(children->size()) != L) {
      throw Error(ErrorCode::kInvalidArgument,
                  "explicit child map must have one entry per parent layer");
    }
    topo.children_ = *children;
  } else {
    topo.children_.resize(L);
    for (int l = 0; l < L; ++l) {
      topo.children_[l] =
          EvenSplit(topo.layer_sizes_[l], topo.layer_sizes_[l + 1]);
    }
  }

  topo.parents_.assign(L + 1, {});
  for (int l = 0; l < L; ++l) {
    const auto& layer_children = topo.children_[l];
    if (static_cast<int>(layer_children.size()) != topo.layer_sizes_[l]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "child map for layer " + std::to_string(l) +
                      " does not match the layer size");
    }
    std::vector<int> parent(topo.layer_sizes_[l + 1], -1);
    for (int c = 0; c < topo.layer_sizes_[l]; ++c) {
      if (layer_children[c].empty()) {
        throw Error(ErrorCode::kEmptySubnet,
                    "node " + std::to_string(l) + ":" + std::to_string(c) +
                        " has no children");
      }
      for (int child : layer_children[c]) {
        if (child < 0 || child >= topo.layer_sizes_[l + 1]) {
          throw Error(ErrorCode::kInvalidArgument,
                      "child id " + std::to_string(child) + " out of range");
        }
        if (parent[child] != -1) {
          throw Error(ErrorCode::kInvalidArgument,
                      "node " + std::to_string(l + 1) + ":" +
                          std::to_string(child) + " has two parents");
        }
        parent[child] = c;
      }
    }
    for (int i = 0; i < topo.layer_sizes_[l + 1]; ++i) {
      if (parent[i] == -1) {
        throw Error(ErrorCode::kOrphanNode,
                    "node " + std::to_string(l + 1) + ":" + std::to_string(i) +
                        " has no parent");
      }
    }
    topo.parents_[l + 1] = std::move(parent);
  }

  topo.trust_.assign(L, {});
  topo.trust_[0] = {cloud_secure ? Trust::kSecure : Trust::kInsecure};
  for (int l = 1; l < L; ++l) {
    topo.trust_[l].assign(topo.layer_sizes_[l], Trust::kInsecure);
  }
  for (const auto& [key, label] : trust_assignment) {
    const auto [l, c] = key;
    if (l < 1 || l > L - 1) {
      throw Error(ErrorCode::kInvalidLayer,
                  "trust label for layer " + std::to_string(l) +
                      "; labels apply to layers 1.." + std::to_string(L - 1));
    }
    if (c < 0 || c >= topo.layer_sizes_[l]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "trust label for unknown node " + std::to_string(l) + ":" +
                      std::to_string(c));
    }
    topo.trust_[l][c] = label;
  }

  // A secure node may only receive from secure children.
  for (int l = 0; l + 1 < L; ++l) {
    for (int c = 0; c < topo.layer_sizes_[l]; ++c) {
      if (topo.trust_[l][c] != Trust::kSecure) continue;
      for (int child : topo.children_[l][c]) {
        if (topo.trust_[l + 1][child] == Trust::kInsecure) {
          throw Error(ErrorCode::kTrustInconsistent,
                      "secure node " + std::to_string(l) + ":" +
                          std::to_string(c) + " has insecure child " +
                          std::to_string(l + 1) + ":" + std::to_string(child));
        }
      }
    }
  }
  return topo;
}

TrustAssignment TrustFromRatios(const std::vector<int>& layer_sizes,
                                const std::vector<double>& ratios,
                                bool cloud_secure) {
  const int L = static_cast<int>(layer_sizes.size());
  if (static_cast<int>(ratios.size()) != std::max(L - 1, 0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "need one secure ratio per intermediate layer (" +
                    std::to_string(L - 1) + ")");
  }
  TrustAssignment out;
  std::vector<Trust> upper = {cloud_secure ? Trust::kSecure : Trust::kInsecure};
  std::vector<int> sizes = {1};
  sizes.insert(sizes.end(), layer_sizes.begin(), layer_sizes.end());
  for (int l = 1; l < L; ++l) {
    const double p = ratios[l - 1];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "secure ratio outside [0, 1]");
    }
    std::vector<Trust> current(sizes[l], Trust::kInsecure);
    const auto split = EvenSplit(sizes[l - 1], sizes[l]);
    for (int parent = 0; parent < sizes[l - 1]; ++parent) {
      const auto& kids = split[parent];
      const int n = static_cast<int>(kids.size());
      if (upper[parent] == Trust::kSecure) {
        for (int kid : kids) current[kid] = Trust::kSecure;
        continue;
      }
      const int k = static_cast<int>(std::lround(p * n));
      for (int i = 0; i < n; ++i) {
        // Bresenham-style spread of k secure slots over n children.
        if ((i + 1) * k / n > i * k / n) current[kids[i]] = Trust::kSecure;
      }
    }
    for (int c = 0; c < sizes[l]; ++c) out[{l, c}] = current[c];
    upper = std::move(current);
  }
  return out;
}

TrustStats TrustStats::WithDeviceFanout(int sampled_fanout) const {
  TrustStats out = *this;
  if (num_layers >= 1) out.min_fanout[num_layers - 1] = sampled_fanout;
  return out;
}

TrustStats DeriveTrustStats(const TierTopology& topology) {
  const int L = topology.num_layers();
  TrustStats stats;
  stats.num_layers = L;
  stats.ratio.assign(L + 1, {});
  stats.p_min.assign(L + 1, 1.0);
  stats.p_max.assign(L + 1, 1.0);
  stats.min_fanout.assign(L, 0);

  const double p0 = topology.cloud_secure() ? 1.0 : 0.0;
  stats.p_min[0] = stats.p_max[0] = p0;

  for (int l = 1; l <= L - 1; ++l) {
    double lo = 1.0;
    double hi = 1.0;
    bool any = false;
    for (int c = 0; c < topology.layer_size(l - 1); ++c) {
      if (topology.is_secure(l - 1, c)) continue;
      const auto kids = topology.children(l - 1, c);
      int secure = 0;
      for (int kid : kids) secure += topology.is_secure(l, kid) ? 1 : 0;
      const double p = static_cast<double>(secure) / kids.size();
      stats.ratio[l][c] = p;
      lo = any ? std::min(lo, p) : p;
      hi = any ? std::max(hi, p) : p;
      any = true;
    }
    // With no insecure parent in layer l-1 every node below is secure.
    stats.p_min[l] = any ? lo : 1.0;
    stats.p_max[l] = any ? hi : 1.0;
  }

  for (int l = 0; l < L; ++l) {
    int smallest = 0;
    for (int c = 0; c < topology.layer_size(l); ++c) {
      const int n = static_cast<int>(topology.children(l, c).size());
      smallest = (c == 0) ? n : std::min(smallest, n);
    }
    stats.min_fanout[l] = smallest;
  }
  return stats;
}

}  // namespace m2fdp
