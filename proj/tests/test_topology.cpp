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

#include <set>

#include "m2fdp/error.hpp"
#include "m2fdp/topology.hpp"
#include "test_util.hpp"

namespace m2fdp {
namespace {

TrustAssignment SecureLayer(const std::vector<int>& sizes, int layer) {
  TrustAssignment t;
  for (int c = 0; c < sizes[layer - 1]; ++c) t[{layer, c}] = Trust::kSecure;
  return t;
}

using testing::CodeOf;

TEST(Topology, DefaultTwoTierTree) {
  const auto topo = BuildTopology({10, 50}, SecureLayer({10, 50}, 1), false);
  EXPECT_EQ(topo.num_layers(), 2);
  EXPECT_EQ(topo.layer_size(1), 10);
  EXPECT_EQ(topo.num_devices(), 50);
  EXPECT_EQ(topo.children(0, 0).size(), 10u);
  for (int c = 0; c < 10; ++c) {
    EXPECT_EQ(topo.children(1, c).size(), 5u);
    EXPECT_TRUE(topo.is_secure(1, c));
  }
  EXPECT_FALSE(topo.cloud_secure());
}

TEST(Topology, StarIsSingleLayer) {
  const auto topo = BuildTopology({1}, {}, false);
  EXPECT_EQ(topo.num_layers(), 1);
  EXPECT_EQ(topo.num_devices(), 1);
  EXPECT_EQ(topo.children(0, 0).size(), 1u);
}

TEST(Topology, FiveLayerNetwork) {
  const std::vector<int> sizes = {2, 8, 32, 128};
  const auto topo = BuildTopology(sizes, TrustFromRatios(sizes, {0.5, 0, 1}, false), false);
  EXPECT_EQ(topo.num_layers(), 4);
  for (int l = 0; l < 4; ++l) {
    for (int c = 0; c < topo.layer_size(l); ++c) {
      EXPECT_EQ(topo.children(l, c).size(), l == 0 ? 2u : 4u);
    }
  }
}

TEST(Topology, AncestorLookup) {
  const auto topo = BuildTopology({2, 8}, {}, false);
  EXPECT_EQ(topo.ancestor_of(0, 1), 0);
  EXPECT_EQ(topo.ancestor_of(7, 1), 1);
  EXPECT_EQ(topo.ancestor_of(3, 1), 0);
  EXPECT_EQ(topo.ancestor_of(4, 1), 1);
}

TEST(Topology, AncestorIsInverseOfChildMap) {
  const auto topo = BuildTopology({3, 7, 23}, {}, false);
  const int L = topo.num_layers();
  for (int j = 0; j < topo.num_devices(); ++j) {
    const int parent = topo.ancestor_of(j, L - 1);
    const auto kids = topo.children(L - 1, parent);
    EXPECT_NE(std::find(kids.begin(), kids.end(), j), kids.end());
    EXPECT_EQ(topo.ancestor_of(j, 1), topo.AncestorAt(L - 1, parent, 1));
  }
  EXPECT_THROW((void)topo.ancestor_of(0, 0), Error);
  EXPECT_THROW((void)topo.ancestor_of(0, L), Error);
  EXPECT_THROW((void)topo.ancestor_of(topo.num_devices(), 1), Error);
}

TEST(Topology, EvenSplitGivesRemainderToLastParents) {
  const auto split = EvenSplit(3, 11);
  ASSERT_EQ(split.size(), 3u);
  EXPECT_EQ(split[0].size(), 3u);
  EXPECT_EQ(split[1].size(), 4u);
  EXPECT_EQ(split[2].size(), 4u);
  std::vector<int> flat;
  for (const auto& s : split) flat.insert(flat.end(), s.begin(), s.end());
  for (int i = 0; i < 11; ++i) EXPECT_EQ(flat[i], i);
}

TEST(Topology, ValidationErrors) {
  EXPECT_EQ(CodeOf([] { BuildTopology({}, {}, false); }), ErrorCode::kEmptyLayer);
  EXPECT_EQ(CodeOf([] { BuildTopology({2, 0}, {}, false); }), ErrorCode::kEmptyLayer);
  EXPECT_EQ(CodeOf([] { BuildTopology({4, 2}, {}, false); }), ErrorCode::kEmptySubnet);
  // a secure node with an insecure child
  TrustAssignment bad;
  bad[{1, 0}] = Trust::kSecure;
  bad[{2, 0}] = Trust::kInsecure;
  EXPECT_EQ(CodeOf([&] { BuildTopology({2, 4, 8}, bad, false); }),
            ErrorCode::kTrustInconsistent);
  // a secure cloud forces every node secure
  EXPECT_EQ(CodeOf([] { BuildTopology({2, 4}, {}, true); }), ErrorCode::kTrustInconsistent);
  TrustAssignment device_label;
  device_label[{2, 0}] = Trust::kSecure;
  EXPECT_EQ(CodeOf([&] { BuildTopology({2, 4}, device_label, false); }),
            ErrorCode::kInvalidLayer);
  // explicit map that leaves child 3 without a parent
  ChildMap orphan = {{{0, 1}}, {{0, 1}, {2}}};
  EXPECT_EQ(CodeOf([&] { BuildTopology({2, 4}, {}, false, orphan); }), ErrorCode::kOrphanNode);
}

TEST(Topology, ExplicitChildMap) {
  ChildMap map = {{{0, 1}}, {{0}, {1, 2, 3}}};
  const auto topo = BuildTopology({2, 4}, {}, false, map);
  EXPECT_EQ(topo.children(1, 0).size(), 1u);
  EXPECT_EQ(topo.children(1, 1).size(), 3u);
  EXPECT_EQ(topo.parent(2, 3), 1);
  EXPECT_EQ(DeriveTrustStats(topo).min_fanout[1], 1);
}

TEST(TrustStats, AllSecureIntermediate) {
  const std::vector<int> sizes = {2, 4, 8};
  TrustAssignment t = SecureLayer(sizes, 1);
  for (auto& [k, v] : SecureLayer(sizes, 2)) t[k] = v;
  const auto stats = DeriveTrustStats(BuildTopology(sizes, t, false));
  EXPECT_EQ(stats.p_min[0], 0.0);
  EXPECT_EQ(stats.p_max[0], 0.0);
  for (int l = 1; l <= 3; ++l) {
    EXPECT_EQ(stats.p_min[l], 1.0);
    EXPECT_EQ(stats.p_max[l], 1.0);
  }
}

TEST(TrustStats, HalfSecureSpreadEvenly) {
  const std::vector<int> sizes = {10, 50};
  const auto stats = DeriveTrustStats(BuildTopology(sizes, TrustFromRatios(sizes, {0.5}, false), false));
  EXPECT_DOUBLE_EQ(stats.p_min[1], 0.5);
  EXPECT_DOUBLE_EQ(stats.p_max[1], 0.5);
  EXPECT_EQ(stats.p_min[2], 1.0);
  EXPECT_EQ(stats.min_fanout[0], 10);
  EXPECT_EQ(stats.min_fanout[1], 5);
}

TEST(TrustStats, ConfigD2) {
  const std::vector<int> sizes = {2, 8, 32, 128};
  const auto stats =
      DeriveTrustStats(BuildTopology(sizes, TrustFromRatios(sizes, {0.5, 0, 1}, false), false));
  EXPECT_DOUBLE_EQ(stats.p_min[1], 0.5);
  EXPECT_DOUBLE_EQ(stats.p_min[2], 0.0);
  EXPECT_DOUBLE_EQ(stats.p_min[3], 1.0);
  EXPECT_DOUBLE_EQ(stats.p_max[3], 1.0);
}

TEST(TrustStats, MixedRatiosPerParent) {
  // parent 0 has 1 of 4 secure children, parent 1 has 3 of 4
  TrustAssignment t;
  t[{2, 0}] = Trust::kSecure;
  for (int c : {4, 5, 6}) t[{2, c}] = Trust::kSecure;
  const auto stats = DeriveTrustStats(BuildTopology({2, 8, 16}, t, false));
  EXPECT_DOUBLE_EQ(stats.p_min[2], 0.25);
  EXPECT_DOUBLE_EQ(stats.p_max[2], 0.75);
  EXPECT_DOUBLE_EQ(stats.ratio[2].at(1), 0.75);
}

TEST(TrustStats, WithDeviceFanoutReplacesLastEntry) {
  const auto stats = DeriveTrustStats(BuildTopology({10, 50}, {}, false));
  const auto sampled = stats.WithDeviceFanout(2);
  EXPECT_EQ(sampled.min_fanout[0], 10);
  EXPECT_EQ(sampled.min_fanout[1], 2);
}

// Property: ratios and fanouts stay in range, and the secure count under every
// insecure parent is round(ratio * fanout).
TEST(TrustStats, RatiosMatchRequestedCounts) {
  for (int n1 : {1, 3, 7}) {
    for (int fan : {1, 2, 5, 9}) {
      for (double r : {0.0, 0.2, 0.5, 0.8, 1.0}) {
        const std::vector<int> sizes = {n1, n1 * fan};
        const auto topo = BuildTopology(sizes, TrustFromRatios(sizes, {r}, false), false);
        const auto stats = DeriveTrustStats(topo);
        const double expect = std::round(r * n1) / n1;
        EXPECT_DOUBLE_EQ(stats.p_min[1], expect);
        EXPECT_DOUBLE_EQ(stats.p_max[1], expect);
        EXPECT_GE(stats.p_min[1], 0.0);
        EXPECT_LE(stats.p_max[1], 1.0);
      }
    }
  }
}

}  // namespace
}  // namespace m2fdp
