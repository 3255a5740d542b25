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

#include "labelfish/defenses.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "labelfish/error.h"
#include "test_util.h"

namespace labelfish {
namespace {

using ::labelfish::testing::ErrorCodeOf;

GradientSet FlatSet(std::vector<double> values) {
  const std::size_t n = values.size();
  return GradientSet({{Tensor(Shape{n}, std::move(values))}});
}

GradientSet RandomSet(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return FlatSet(std::move(v));
}

TEST(GaussianTest, ZeroSigmaIsBitIdentical) {
  const GradientSet g = RandomSet(100, 1);
  Rng rng(2);
  EXPECT_EQ(ApplyGaussian(g, 0.0, rng), g);
}

TEST(GaussianTest, NoiseMomentsMatchSigma) {
  constexpr std::size_t kN = 1000000;
  constexpr double kSigma = 1e-3;
  const GradientSet zero = FlatSet(std::vector<double>(kN, 0.0));
  Rng rng(3);
  const auto noise = ApplyGaussian(zero, kSigma, rng).Flatten();
  const double mean = std::accumulate(noise.begin(), noise.end(), 0.0) / kN;
  double var = 0.0;
  for (double v : noise) var += (v - mean) * (v - mean);
  const double std = std::sqrt(var / kN);
  EXPECT_LT(std::abs(mean), 5 * kSigma / std::sqrt(static_cast<double>(kN)));
  EXPECT_LT(std::abs(std / kSigma - 1.0), 0.02);
}

TEST(GaussianTest, FixedSeedIsReproducible) {
  const GradientSet g = RandomSet(50, 4);
  const DefenseConfig cfg{DefenseKind::kGaussian, 1e-2, 0.0, 77};
  EXPECT_EQ(ApplyDefense(g, cfg, 3, 8), ApplyDefense(g, cfg, 3, 8));
  EXPECT_NE(ApplyDefense(g, cfg, 3, 8), ApplyDefense(g, cfg, 3, 9));
  EXPECT_NE(ApplyDefense(g, cfg, 3, 8), ApplyDefense(g, cfg, 4, 8));
}

TEST(CompressionTest, ZeroThetaIsIdentity) {
  const GradientSet g = RandomSet(10, 5);
  EXPECT_EQ(ApplyCompression(g, 0.0), g);
}

TEST(CompressionTest, HandRankedExample) {
  EXPECT_EQ(ApplyCompression(FlatSet({0.1, -0.5, 0.2, 0.05}), 0.5).Flatten(),
            (std::vector<double>{0.0, -0.5, 0.2, 0.0}));
}

TEST(CompressionTest, TiesBreakByFlatIndex) {
  EXPECT_EQ(ApplyCompression(FlatSet({0.3, -0.3, 0.3, 0.3}), 0.5).Flatten(),
            (std::vector<double>{0.0, 0.0, 0.3, 0.3}));
}

TEST(CompressionTest, MatchesSortOracleAcrossLayers) {
  std::mt19937_64 rng(6);
  GradientSet g({{testing::RandomTensor({7, 11}, rng)},
                 {testing::RandomTensor({13}, rng),
                  testing::RandomTensor({2, 3, 4}, rng)}});
  const auto flat = g.Flatten();
  const auto out = ApplyCompression(g, 0.8).Flatten();
  const auto drop = static_cast<std::size_t>(
      std::floor(0.8 * static_cast<double>(flat.size())));

  std::vector<std::size_t> order(flat.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return std::abs(flat[a]) < std::abs(flat[b]);
                   });
  std::size_t zeros = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (k < drop) {
      EXPECT_EQ(out[i], 0.0);
    } else {
      EXPECT_EQ(out[i], flat[i]);  // survivors keep sign and value
    }
    zeros += out[i] == 0.0;
  }
  EXPECT_EQ(zeros, drop);
}

TEST(DefenseConfigTest, Validation) {
  EXPECT_EQ(ErrorCodeOf([] {
              DefenseConfig{DefenseKind::kGaussian, -1.0, 0.0, 0}.Validate();
            }),
            ErrorCode::kConfig);
  EXPECT_EQ(ErrorCodeOf([] {
              DefenseConfig{DefenseKind::kCompression, 0.0, 1.0, 0}.Validate();
            }),
            ErrorCode::kConfig);
  EXPECT_EQ(ParseDefenseKind("compression"), DefenseKind::kCompression);
  EXPECT_EQ(ErrorCodeOf([] { ParseDefenseKind("dp"); }), ErrorCode::kConfig);
}

}  // namespace
}  // namespace labelfish
