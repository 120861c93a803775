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

#include <Eigen/Dense>
#include <cmath>

#include "m2fdp/model.hpp"
#include "m2fdp/rng.hpp"
#include "test_util.hpp"

namespace m2fdp {
namespace {

using testing::CodeOf;

FederatedDataset Tiny(int dim, int classes, std::vector<std::vector<double>> rows,
                      std::vector<int> labels) {
  FederatedDataset ds;
  ds.feature_dim = dim;
  ds.num_classes = classes;
  DeviceData d;
  for (const auto& r : rows) d.features.insert(d.features.end(), r.begin(), r.end());
  d.labels = std::move(labels);
  ds.devices.push_back(d);
  return ds;
}

TEST(Loss, RidgeZeroResidual) {
  const auto ds = Tiny(2, 1, {{1, 2}, {3, 4}}, {0, 0});
  LossSpec s{LossKind::kRidge};
  EXPECT_EQ(LocalLoss(s, Vec{0, 0}, ds, 0), 0.0);
}

TEST(Loss, LogisticAtZeroIsLn2) {
  const auto ds = Tiny(2, 2, {{1, 2}, {3, 4}, {-1, 0}, {2, 2}}, {0, 1, 0, 1});
  LossSpec s{LossKind::kLogistic};
  EXPECT_NEAR(LocalLoss(s, Vec{0, 0}, ds, 0), std::log(2.0), 1e-15);
}

TEST(Loss, HandComputedThreePoints) {
  const auto ds = Tiny(2, 2, {{1, 0}, {0, 2}, {1, 1}}, {1, 0, 1});
  const Vec w = {0.5, -0.25};
  LossSpec s{LossKind::kLogistic, 0.2};
  // margins y·w·x with y in {-1, +1}
  const double m[3] = {0.5, 0.5, 0.25};
  double want = 0;
  for (double v : m) want += std::log1p(std::exp(-v));
  want = want / 3 + 0.1 * (0.25 + 0.0625);
  EXPECT_NEAR(LocalLoss(s, w, ds, 0), want, 1e-12);

  LossSpec ridge{LossKind::kRidge};
  const double r = (0.5 * 0.25 + 0.5 * 0.25 + 0.5 * 0.5625) / 3;
  EXPECT_NEAR(LocalLoss(ridge, w, ds, 0), r, 1e-12);

  LossSpec hinge{LossKind::kHinge};
  const double h = ((1 - 0.5) + (1 - 0.5) + (1 - 0.25)) / 3;
  EXPECT_NEAR(LocalLoss(hinge, w, ds, 0), h, 1e-12);
}

TEST(Model, Dimension) {
  EXPECT_EQ(ModelDim({LossKind::kLogistic}, 10, 2), 10);
  EXPECT_EQ(ModelDim({LossKind::kLogistic}, 10, 5), 50);
  EXPECT_EQ(ModelDim({LossKind::kHinge}, 10, 3), 30);
  EXPECT_EQ(ModelDim({LossKind::kRidge}, 10, 3), 10);
}

// Gradients agree with central differences for every loss, binary and multiclass.
TEST(Gradient, FiniteDifferenceCheck) {
  for (auto kind : {LossKind::kRidge, LossKind::kLogistic, LossKind::kHinge}) {
    for (int classes : {2, 3}) {
      const auto ds = GenerateSynthetic(1, 12, 4, classes, 0.3, 11);
      LossSpec s{kind, 0.05};
      const int M = ModelDim(s, 4, classes);
      RngStream rng(3, StreamPurpose::kInit, {0});
      Vec w(M);
      for (double& v : w) v = 0.3 * rng.Normal();
      const Vec g = LocalGradient(s, w, ds, 0);
      const double h = 1e-6;
      for (int i = 0; i < M; ++i) {
        Vec up = w, dn = w;
        up[i] += h;
        dn[i] -= h;
        const double fd = (LocalLoss(s, up, ds, 0) - LocalLoss(s, dn, ds, 0)) / (2 * h);
        EXPECT_NEAR(g[i], fd, 1e-5) << "kind " << static_cast<int>(kind) << " i " << i;
      }
    }
  }
}

TEST(Gradient, SizeMismatch) {
  const auto ds = GenerateSynthetic(1, 4, 3, 2, 0.3, 1);
  EXPECT_EQ(CodeOf([&] { LocalGradient({}, Vec{1, 2}, ds, 0); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(CodeOf([&] { LocalLoss({}, Vec{1, 2}, ds, 0); }), ErrorCode::kDimensionMismatch);
}

TEST(GlobalLoss, SingleDevice) {
  const auto ds = GenerateSynthetic(1, 9, 3, 2, 0.3, 4);
  const auto topo = BuildTopology({1}, {}, false);
  const Vec w = {0.1, -0.2, 0.3};
  EXPECT_DOUBLE_EQ(GlobalLoss({}, w, ds, topo), LocalLoss({}, w, ds, 0));
}

TEST(GlobalLoss, HandWeightedExamples) {
  // ridge with target 0 at w = 1 has loss x²/2, so x = √(2·loss)
  auto make = [](const std::vector<double>& losses) {
    FederatedDataset ds;
    ds.feature_dim = 1;
    ds.num_classes = 1;
    for (double v : losses) {
      DeviceData d;
      d.features = {std::sqrt(2 * v)};
      d.labels = {0};
      ds.devices.push_back(d);
    }
    return ds;
  };
  LossSpec ridge{LossKind::kRidge};
  const Vec w = {1.0};
  const auto even = BuildTopology({2, 4}, {}, false);
  EXPECT_NEAR(GlobalLoss(ridge, w, make({1, 2, 3, 4}), even), 2.5, 1e-12);
  EXPECT_NEAR(IntermediateLoss(ridge, w, make({1, 2, 3, 4}), even, 1, 1), 3.5, 1e-12);
  ChildMap uneven = {{{0, 1}}, {{0}, {1, 2, 3}}};
  const auto topo = BuildTopology({2, 4}, {}, false, uneven);
  EXPECT_NEAR(GlobalLoss(ridge, w, make({1, 1, 1, 4}), topo), 1.5, 1e-12);
  const auto w8 = DeviceWeights(topo);
  EXPECT_DOUBLE_EQ(w8[0], 0.5);
  EXPECT_DOUBLE_EQ(w8[1], 0.5 / 3);
}

TEST(GlobalGradient, MatchesWeightedLocalGradients) {
  const auto ds = GenerateSynthetic(6, 10, 3, 2, 0.5, 2);
  ChildMap map = {{{0, 1}}, {{0, 1}, {2, 3, 4, 5}}};
  const auto topo = BuildTopology({2, 6}, {}, false, map);
  LossSpec s{LossKind::kLogistic, 0.1};
  const Vec w = {0.2, -0.1, 0.4};
  const Vec g = GlobalGradient(s, w, ds, topo);
  const auto weights = DeviceWeights(topo);
  Vec want(3, 0.0);
  for (int j = 0; j < 6; ++j) Axpy(weights[j], LocalGradient(s, w, ds, j), want);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(g[i], want[i], 1e-14);
}

TEST(Clip, InsideAndOnBoundary) {
  Vec a = {3, 0};
  ClipToNorm(a, 10);
  EXPECT_EQ(a, (Vec{3, 0}));
  Vec b = {12, 16};
  ClipToNorm(b, 10);
  EXPECT_NEAR(Norm(b), 10.0, 1e-12);
  EXPECT_NEAR(b[0] / b[1], 0.75, 1e-12);
}

// Property: every stochastic gradient respects the clip norm.
TEST(StochasticGradient, AlwaysClipped) {
  const auto ds = GenerateSynthetic(3, 40, 5, 3, 0.5, 8);
  RngStream rng(2, StreamPurpose::kMinibatch, {0});
  for (auto kind : {LossKind::kRidge, LossKind::kLogistic, LossKind::kHinge}) {
    LossSpec s{kind, 0.0, 0.3};
    const int M = ModelDim(s, 5, 3);
    for (int trial = 0; trial < 50; ++trial) {
      Vec w(M);
      for (double& v : w) v = 3 * rng.Normal();
      const auto mb = SampleMinibatch(ds, trial % 3, 0.2, rng);
      EXPECT_LE(Norm(StochasticGradient(s, w, ds, mb)), 0.3 * (1 + 1e-12));
    }
  }
  Minibatch empty;
  EXPECT_EQ(CodeOf([&] { StochasticGradient({}, Vec(5, 0.0), ds, empty); }), ErrorCode::kEmptyBatch);
}

TEST(Beta, EigenvalueOracle) {
  Eigen::Matrix3d A;
  A << 4, 1, 0.5, 1, 3, 0.2, 0.5, 0.2, 1;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(A);
  const double lmax = eig.eigenvalues().maxCoeff();
  const Eigen::Vector3d top = eig.eigenvectors().col(2);
  auto entry = [&](const Eigen::Vector3d& w) {
    const Eigen::Vector3d g = A * w;
    return std::make_pair(Vec{w[0], w[1], w[2]}, Vec{g[0], g[1], g[2]});
  };
  // arbitrary iterates stay below λ_max
  RngStream rng(1, StreamPurpose::kProbe, {0});
  std::vector<std::pair<Vec, Vec>> trace;
  for (int i = 0; i < 20; ++i) trace.push_back(entry(Eigen::Vector3d(rng.Normal(), rng.Normal(), rng.Normal())));
  EXPECT_LE(EstimateBeta(trace), lmax * (1 + 1e-12));
  // iterates that differ along the top eigenvector recover it
  std::vector<std::pair<Vec, Vec>> aligned = {entry(top * 0.5), entry(top * 2.0), entry(top * -1.0)};
  EXPECT_NEAR(EstimateBeta(aligned), lmax, 1e-12);
}

TEST(Beta, DegenerateAndFloor) {
  const std::pair<Vec, Vec> p = {Vec{1, 2}, Vec{0, 1}};
  EXPECT_EQ(CodeOf([&] { EstimateBeta({p, p}); }), ErrorCode::kDegenerateTrace);
  // a linear loss has constant gradient
  EXPECT_EQ(EstimateBeta({{Vec{0, 0}, Vec{1, 1}}, {Vec{1, 0}, Vec{1, 1}}}), kBetaFloor);
}

}  // namespace
}  // namespace m2fdp
