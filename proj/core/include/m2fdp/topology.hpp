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

#ifndef M2FDP_TOPOLOGY_HPP_
#define M2FDP_TOPOLOGY_HPP_

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace m2fdp {

enum class Trust { kSecure, kInsecure };

// (layer, node) key used for trust labels. Layer 0 is the cloud server.
using NodeKey = std::pair<int, int>;
using TrustAssignment = std::map<NodeKey, Trust>;

// Explicit child lists: children[l][c] lists the ids in layer l+1 attached to
// node c of layer l, for l in [0, L-1].
using ChildMap = std::vector<std::vector<std::vector<int>>>;

// The aggregation tree. Layer 0 holds the single cloud node, layers 1..L-1
// hold intermediate aggregators and layer L holds the edge devices. Node ids
// are dense and 0-based within each layer. Immutable once built.
class TierTopology {
 public:
  int num_layers() const { return static_cast<int>(layer_sizes_.size()) - 1; }
  int layer_size(int layer) const { return layer_sizes_.at(layer); }
  int num_devices() const { return layer_sizes_.back(); }

  std::span<const int> children(int layer, int node) const {
    return children_.at(layer).at(node);
  }
  int parent(int layer, int node) const { return parents_.at(layer).at(node); }

  // Defined for layers 0..L-1. Edge devices carry no label.
  Trust trust(int layer, int node) const { return trust_.at(layer).at(node); }
  bool is_secure(int layer, int node) const {
    return trust(layer, node) == Trust::kSecure;
  }
  bool cloud_secure() const { return is_secure(0, 0); }

  // d_{l,j}: the layer-l node on the path from device j to the cloud.
  // Valid for 1 <= l <= L-1.
  int ancestor_of(int device, int layer) const;

  // Same walk without the layer restriction; layer in [0, L].
  int AncestorAt(int layer_of_node, int node, int target_layer) const;

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }

 private:
  friend TierTopology BuildTopology(const std::vector<int>&,
                                    const TrustAssignment&, bool,
                                    const std::optional<ChildMap>&);

  std::vector<int> layer_sizes_;  // index 0 is the cloud (size 1)
  ChildMap children_;
  std::vector<std::vector<int>> parents_;  // parents_[l][c] for l >= 1
  std::vector<std::vector<Trust>> trust_;  // layers 0..L-1
};

// Builds and validates a tree. layer_sizes = [N_1, ..., N_L]. Children are
// assigned by contiguous even split (remainder to the last parents) unless
// an explicit map is given. Labels missing from trust_assignment default to
// insecure. Inconsistent labels are rejected, never repaired.
TierTopology BuildTopology(const std::vector<int>& layer_sizes,
                           const TrustAssignment& trust_assignment,
                           bool cloud_secure,
                           const std::optional<ChildMap>& children = std::nullopt);

// Contiguous even split of `num_children` ids over `num_parents` parents.
std::vector<std::vector<int>> EvenSplit(int num_parents, int num_children);

// Produces labels for layers 1..L-1 from per-layer secure ratios: children
// of secure parents are secure, and under each insecure parent
// round(ratio * fanout) children are marked secure, spread evenly.
TrustAssignment TrustFromRatios(const std::vector<int>& layer_sizes,
                                const std::vector<double>& ratios,
                                bool cloud_secure);

// Per-layer secure ratios and minimum fanouts.
struct TrustStats {
  int num_layers = 0;
  // p_{l,c} for l in [1, L-1], keyed by the insecure parent c in layer l-1.
  std::vector<std::map<int, double>> ratio;
  // p_l^min / p_l^max for l in [0, L].
  std::vector<double> p_min;
  std::vector<double> p_max;
  // s_l = min_c |S_{l,c}| for l in [0, L-1]; s_0 is the cloud fanout N_1.
  std::vector<int> min_fanout;

  // Copy with s_{L-1} replaced by a sampled fanout (partial participation).
  TrustStats WithDeviceFanout(int sampled_fanout) const;
};

TrustStats DeriveTrustStats(const TierTopology& topology);

}  // namespace m2fdp

#endif  // M2FDP_TOPOLOGY_HPP_
