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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "m2fdp/dataset.hpp"
#include "m2fdp/rng.hpp"
#include "test_util.hpp"

namespace m2fdp {
namespace {

using testing::CodeOf;

std::string WriteTemp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("m2fdp_" + name);
  std::ofstream(path) << text;
  return path.string();
}

TEST(Synthetic, IidLimitBalancesClasses) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto ds = GenerateSynthetic(4, 1000, 3, 2, 0.0, seed);
    for (const auto& dev : ds.devices) {
      int ones = 0;
      for (int y : dev.labels) ones += y;
      EXPECT_NEAR(ones / 1000.0, 0.5, 0.05);
    }
  }
}

TEST(Synthetic, ShardLimitOneClassPerDevice) {
  const auto ds = GenerateSynthetic(10, 30, 4, 10, 1.0, 5);
  for (int j = 0; j < 10; ++j) {
    const std::set<int> labels(ds.devices[j].labels.begin(), ds.devices[j].labels.end());
    ASSERT_EQ(labels.size(), 1u);
    EXPECT_EQ(*labels.begin(), j);
  }
}

TEST(Synthetic, Deterministic) {
  const auto a = GenerateSynthetic(5, 20, 6, 3, 0.4, 42);
  const auto b = GenerateSynthetic(5, 20, 6, 3, 0.4, 42);
  const auto c = GenerateSynthetic(5, 20, 6, 3, 0.4, 43);
  for (int j = 0; j < 5; ++j) {
    EXPECT_EQ(a.devices[j].features, b.devices[j].features);
    EXPECT_EQ(a.devices[j].labels, b.devices[j].labels);
  }
  EXPECT_NE(a.devices[0].features, c.devices[0].features);
}

TEST(Synthetic, ShapesAndErrors) {
  const auto ds = GenerateSynthetic(3, 7, 5, 4, 0.2, 1);
  EXPECT_EQ(ds.num_devices(), 3);
  EXPECT_EQ(ds.feature_dim, 5);
  EXPECT_EQ(ds.num_classes, 4);
  EXPECT_EQ(ds.devices[2].features.size(), 35u);
  EXPECT_EQ(ds.row(1, 6).size(), 5u);
  EXPECT_EQ(CodeOf([] { GenerateSynthetic(3, 7, 5, 4, 1.5, 1); }),
            ErrorCode::kInvalidHeterogeneity);
  EXPECT_EQ(CodeOf([] { GenerateSynthetic(3, 0, 5, 4, 0.5, 1); }), ErrorCode::kZeroSamples);
}

std::string HundredRows(bool sorted) {
  std::string text;
  for (int i = 0; i < 100; ++i) {
    const int label = sorted ? i / 10 : i % 10;
    text += std::to_string(label) + "," + std::to_string(i) + ".5,-1\n";
  }
  return text;
}

TEST(Csv, IidDealsEvenly) {
  const auto ds = PartitionCsv(WriteTemp("iid.csv", HundredRows(false)), 10, PartitionStrategy::kIid);
  EXPECT_EQ(ds.feature_dim, 2);
  EXPECT_EQ(ds.num_classes, 10);
  for (const auto& d : ds.devices) EXPECT_EQ(d.size(), 10);
  EXPECT_DOUBLE_EQ(ds.row(0, 0)[0], 0.5);
}

TEST(Csv, ByLabelShards) {
  const auto ds =
      PartitionCsv(WriteTemp("bylabel.csv", HundredRows(true)), 10, PartitionStrategy::kByLabel);
  for (int k = 0; k < 10; ++k) {
    for (int y : ds.devices[k].labels) EXPECT_EQ(y, k);
  }
}

TEST(Csv, RaggedRowNamesLine) {
  const std::string path = WriteTemp("ragged.csv", "0,1,2\n1,3,4\n0,5\n");
  try {
    PartitionCsv(path, 1, PartitionStrategy::kIid);
    FAIL() << "expected MalformedRow";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedRow);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
  EXPECT_EQ(CodeOf([] { PartitionCsv(WriteTemp("few.csv", "0,1\n1,2\n"), 3, PartitionStrategy::kIid); }),
            ErrorCode::kTooFewRows);
  EXPECT_EQ(CodeOf([] { PartitionCsv("/nonexistent/x.csv", 1, PartitionStrategy::kIid); }),
            ErrorCode::kIoError);
}

TEST(Minibatch, FullWhenQIsOne) {
  const auto ds = GenerateSynthetic(2, 30, 2, 2, 0.5, 1);
  RngStream rng(1, StreamPurpose::kMinibatch, {0});
  const auto mb = SampleMinibatch(ds, 1, 1.0, rng);
  ASSERT_EQ(mb.indices.size(), 30u);
  for (int i = 0; i < 30; ++i) EXPECT_EQ(mb.indices[i], i);
  EXPECT_EQ(mb.device, 1);
}

TEST(Minibatch, BinomialMeanSize) {
  const auto ds = GenerateSynthetic(1, 1000, 1, 2, 0.5, 1);
  RngStream rng(9, StreamPurpose::kMinibatch, {0});
  double total = 0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) total += SampleMinibatch(ds, 0, 0.1, rng).indices.size();
  // sd of the mean of 1000 Binomial(1000, 0.1) sizes
  const double sd = std::sqrt(1000 * 0.1 * 0.9 / draws);
  EXPECT_NEAR(total / draws, 100.0, 3 * sd);
}

TEST(Minibatch, SameStreamStateSameBatch) {
  const auto ds = GenerateSynthetic(1, 200, 1, 2, 0.5, 1);
  RngStream a(5, StreamPurpose::kMinibatch, {1, 2, 3});
  RngStream b(5, StreamPurpose::kMinibatch, {1, 2, 3});
  EXPECT_EQ(SampleMinibatch(ds, 0, 0.2, a).indices, SampleMinibatch(ds, 0, 0.2, b).indices);
}

TEST(Minibatch, NeverEmptyAndValidatesQ) {
  const auto ds = GenerateSynthetic(1, 3, 1, 2, 0.5, 1);
  RngStream rng(5, StreamPurpose::kMinibatch, {0});
  for (int i = 0; i < 200; ++i) EXPECT_FALSE(SampleMinibatch(ds, 0, 0.01, rng).indices.empty());
  EXPECT_EQ(CodeOf([&] { SampleMinibatch(ds, 0, 0.0, rng); }), ErrorCode::kInvalidQ);
  EXPECT_EQ(CodeOf([&] { SampleMinibatch(ds, 0, 1.5, rng); }), ErrorCode::kInvalidQ);
}

}  // namespace
}  // namespace m2fdp
