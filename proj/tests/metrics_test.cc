/*
 * Copyright 2026 The labelfish Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "labelfish/metrics.h"

#include <algorithm>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "labelfish/attack.h"
#include "labelfish/error.h"
#include "test_util.h"

namespace labelfish {
namespace {

using ::labelfish::testing::ErrorCodeOf;

GradientSet FlatSet(std::vector<double> values) {
  const std::size_t n = values.size();
  return GradientSet({{Tensor(Shape{n}, std::move(values))}});
}

TEST(LnAccTest, Examples) {
  EXPECT_EQ(LnAcc({{2, 1, 1}}, {{2, 1, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(LnAcc({{2, 1, 0}}, {{2, 1, 1}}), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(LnAcc({{0, 0, 0, 0, 0}}, {{3, 0, 1, 0, 0}}), 3.0 / 5.0);
  EXPECT_EQ(ErrorCodeOf([] { LnAcc({{1}}, {{1, 2}}); }), ErrorCode::kShape);
}

TEST(LnAccTest, PermutationEquivariant) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dist(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    LabelCounts pred{std::vector<int>(8)}, truth{std::vector<int>(8)};
    for (int& c : pred.counts) c = dist(rng);
    for (int& c : truth.counts) c = dist(rng);
    std::vector<std::size_t> perm(8);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    LabelCounts pp{std::vector<int>(8)}, tp{std::vector<int>(8)};
    for (std::size_t i = 0; i < 8; ++i) {
      pp.counts[i] = pred.counts[perm[i]];
      tp.counts[i] = truth.counts[perm[i]];
    }
    EXPECT_EQ(LnAcc(pred, truth), LnAcc(pp, tp));
  }
}

TEST(LnAccTest, AllClientsUsesClassSums) {
  // Per-client errors that cancel in the sum still score 1.
  const std::vector<LabelCounts> pred{{{2, 0}}, {{0, 2}}};
  const std::vector<LabelCounts> truth{{{1, 1}}, {{1, 1}}};
  EXPECT_EQ(LnAccAll(pred, truth), 1.0);
  EXPECT_EQ(LnAcc(pred[0], truth[0]), 0.0);
}

TEST(CosSimTest, Examples) {
  const GradientSet g = FlatSet({1.0, -2.0, 3.0});
  GradientSet neg = g;
  neg *= -1.0;
  EXPECT_NEAR(CosSim(g, g), 1.0, 1e-15);
  EXPECT_NEAR(CosSim(g, neg), -1.0, 1e-15);
  EXPECT_EQ(CosSim(FlatSet({1, 0, 0}), FlatSet({0, 5, 0})), 0.0);
  EXPECT_EQ(CosSim(FlatSet({0, 0}), FlatSet({1, 0})), 0.0);
  EXPECT_EQ(ErrorCodeOf([] { CosSim(FlatSet({0, 0}), FlatSet({0, 0})); }),
            ErrorCode::kUndefined);
}

TEST(CosSimTest, ScaleInvariant) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    GradientSet a({{testing::RandomTensor({30}, rng)}});
    const GradientSet b({{testing::RandomTensor({30}, rng)}});
    const double before = CosSim(a, b);
    a *= std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    EXPECT_NEAR(CosSim(a, b), before, 1e-12);
  }
}

TEST(NompTest, SelfIsZero) {
  const Model m = MakeCnnBn({1, 6, 6}, 4, 3, 8, 3, 1);
  const auto r = NompRatio(m, m);
  EXPECT_EQ(r.nomp, 0u);
  EXPECT_EQ(r.ratio, 0.0);
}

TEST(NompTest, BatchNormFishingModifiesTwoPerFeature) {
  const Model base = MakeCnnBn({1, 8, 8}, 64, 3, 16, 10, 1);
  const std::size_t layer = FindModifiableLayer(base);
  const Model fishing =
      MakeFishingModel(base, layer, std::vector<double>(64, 0.5));
  const auto r = NompRatio(base, fishing);
  EXPECT_EQ(r.nomp, 128u);
  EXPECT_DOUBLE_EQ(r.ratio,
                   128.0 / static_cast<double>(base.parameter_count()));
}

TEST(NompTest, FirstLayerFishingOnFcn3) {
  const Model base = MakeFcn3(784, 256, 128, 10, 1);
  const Model fishing =
      MakeFishingModel(base, 0, std::vector<double>(256, 0.5));
  EXPECT_EQ(NompRatio(base, fishing).nomp, 784u * 256u + 256u);
  EXPECT_EQ(
      ErrorCodeOf([&] { NompRatio(base, MakeFcn3(784, 256, 64, 10, 1)); }),
      ErrorCode::kArchitecture);
}

}  // namespace
}  // namespace labelfish
