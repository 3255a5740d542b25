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

#include "labelfish/secure_agg.h"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "labelfish/error.h"
#include "test_util.h"

namespace labelfish {
namespace {

using ::labelfish::testing::ErrorCodeOf;

std::vector<Shape> FlatLayout(std::size_t n) { return {Shape{n}, Shape{}}; }

GradientSet FlatSet(std::vector<double> values) {
  const std::size_t n = values.size();
  return GradientSet({{Tensor(Shape{n}, std::move(values))}});
}

GradientSet RandomSet(std::size_t n, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return FlatSet(std::move(v));
}

std::vector<ClientId> Ids(std::size_t count) {
  std::vector<ClientId> ids;
  for (std::size_t i = 0; i < count; ++i)
    ids.push_back(static_cast<ClientId>(3 * i + 1));
  return ids;
}

TEST(MaskPlanTest, MasksCancelExactly) {
  for (std::size_t u : {2u, 5u, 20u}) {
    const MaskPlan plan(Ids(u), 99);
    std::vector<std::uint64_t> total(257, 0);
    for (ClientId id : plan.participants()) {
      const auto mask = plan.NetMask(id, total.size());
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += mask[i];
    }
    for (std::uint64_t w : total) ASSERT_EQ(w, 0u) << "U=" << u;
  }
}

TEST(MaskPlanTest, PairSeedIsSymmetricAndMasksAreNonTrivial) {
  const MaskPlan plan({4, 9}, 5);
  EXPECT_EQ(plan.PairSeed(4, 9), plan.PairSeed(9, 4));
  const auto mask = plan.NetMask(4, 8);
  int zeros = 0;
  for (std::uint64_t w : mask) zeros += w == 0;
  EXPECT_EQ(zeros, 0);
}

TEST(MaskPlanTest, RejectsDuplicatesAndStrangers) {
  EXPECT_EQ(ErrorCodeOf([] { MaskPlan({1, 1}, 0); }), ErrorCode::kProtocol);
  const MaskPlan plan({1, 2}, 0);
  EXPECT_EQ(ErrorCodeOf([&] { plan.NetMask(3, 4); }), ErrorCode::kProtocol);
}

TEST(QuantizeTest, RoundTripAndClip) {
  EXPECT_EQ(Dequantize(Quantize(0.5, 24), 24), 0.5);
  EXPECT_EQ(Dequantize(Quantize(-0.25, 24), 24), -0.25);
  EXPECT_EQ(Quantize(-1.0, 0), ~std::uint64_t{0});
  EXPECT_NEAR(ClipBound(24), std::ldexp(1.0, 15), 0.0);
  EXPECT_EQ(ErrorCodeOf([] { Quantize(std::ldexp(1.0, 15), 24); }),
            ErrorCode::kRange);
  EXPECT_EQ(ErrorCodeOf([] { Quantize(-std::ldexp(1.0, 15), 24); }),
            ErrorCode::kRange);
  EXPECT_EQ(ErrorCodeOf([] { ScaleFactor(40); }), ErrorCode::kConfig);
}

TEST(EncodeTest, SingleMaskedClientIsPlainQuantization) {
  const MaskPlan plan({7}, 1);
  const GradientSet g = FlatSet({0.1, -2.0, 3.5});
  const MaskedUpdate up = Encode(g, plan, 7, {SaMode::kMasked, 24});
  ASSERT_EQ(up.payload.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(up.payload[i], Quantize(g.Flatten()[i], 24));
  }
}

TEST(EncodeTest, IdenticalGradientsFromTwoClientsCancelMasks) {
  const MaskPlan plan({0, 1}, 17);
  const GradientSet g = FlatSet({0.123456789, -7.5, 1e-3});
  const SecureAggConfig cfg{SaMode::kMasked, 24};
  const std::vector<MaskedUpdate> ups{Encode(g, plan, 0, cfg),
                                      Encode(g, plan, 1, cfg)};
  EXPECT_NE(ups[0].payload, ups[1].payload);
  const GradientSet sum = AggregateDecode(ups, plan, FlatLayout(3));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(sum.Flatten()[i],
              Dequantize(2 * Quantize(g.Flatten()[i], 24), 24));
  }
}

TEST(EncodeTest, MaskedResiduesLookUncorrelatedWithPlaintext) {
  constexpr std::size_t kN = 100000;
  std::mt19937_64 rng(3);
  const GradientSet g = RandomSet(kN, rng, 1.0);
  const MaskPlan plan({0, 1, 2}, 11);
  const MaskedUpdate up = Encode(g, plan, 1, {SaMode::kMasked, 24});
  const std::vector<double> x = g.Flatten();
  std::vector<double> y(kN);
  for (std::size_t i = 0; i < kN; ++i) {
    y[i] = static_cast<double>(up.payload[i] >> 11) / std::ldexp(1.0, 53);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < kN; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= kN;
  my /= kN;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < kN; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double corr = sxy / std::sqrt(sxx * syy);
  EXPECT_LT(std::abs(corr), 5.0 / std::sqrt(static_cast<double>(kN)));
  // Residues should also be spread over the whole ring.
  EXPECT_NEAR(my, 0.5, 0.01);
}

TEST(AggregateTest, IdealSingleUpdateIsIdentity) {
  const MaskPlan plan({2}, 0);
  const GradientSet g = FlatSet({1.0 / 3.0, -1e-300, 5e10});
  const std::vector<MaskedUpdate> ups{Encode(g, plan, 2, {})};
  EXPECT_EQ(AggregateDecode(ups, plan, FlatLayout(3)), g);
}

TEST(AggregateTest, IdealSumMatchesPlaintext) {
  std::mt19937_64 rng(5);
  const MaskPlan plan(Ids(4), 3);
  std::vector<MaskedUpdate> ups;
  std::vector<double> truth(50, 0.0);
  for (ClientId id : plan.participants()) {
    const GradientSet g = RandomSet(50, rng, 10.0);
    for (std::size_t i = 0; i < 50; ++i) truth[i] += g.Flatten()[i];
    ups.push_back(Encode(g, plan, id, {}));
  }
  EXPECT_EQ(AggregateDecode(ups, plan, FlatLayout(50)).Flatten(), truth);
}

TEST(AggregateTest, MaskedDecodeErrorWithinBound) {
  std::mt19937_64 rng(8);
  for (int scale_bits : {16, 24}) {
    for (std::size_t u : {3u, 10u}) {
      const MaskPlan plan(Ids(u), 42);
      std::vector<MaskedUpdate> ups;
      std::vector<double> truth(1000, 0.0);
      for (ClientId id : plan.participants()) {
        const GradientSet g = RandomSet(1000, rng, 4.0);
        for (std::size_t i = 0; i < 1000; ++i) truth[i] += g.Flatten()[i];
        ups.push_back(Encode(g, plan, id, {SaMode::kMasked, scale_bits}));
      }
      const auto sum = AggregateDecode(ups, plan, FlatLayout(1000)).Flatten();
      const double bound =
          static_cast<double>(u) / (2.0 * ScaleFactor(scale_bits));
      for (std::size_t i = 0; i < 1000; ++i) {
        ASSERT_LE(std::abs(sum[i] - truth[i]), bound);
      }
    }
  }
}

TEST(AggregateTest, ExactlyRepresentableValuesDecodeExactly) {
  const MaskPlan plan({0, 1, 2}, 9);
  const SecureAggConfig cfg{SaMode::kMasked, 24};
  std::vector<MaskedUpdate> ups;
  for (ClientId id : {0u, 1u, 2u}) {
    ups.push_back(Encode(FlatSet({0.5, 0.25, -0.125}), plan, id, cfg));
  }
  EXPECT_EQ(AggregateDecode(ups, plan, FlatLayout(3)).Flatten(),
            (std::vector<double>{1.5, 0.75, -0.375}));
}

TEST(AggregateTest, ProtocolAndContractErrors) {
  const MaskPlan plan({0, 1}, 1);
  const GradientSet g = FlatSet({1.0});
  const MaskedUpdate a = Encode(g, plan, 0, {SaMode::kMasked, 24});
  const MaskedUpdate b = Encode(g, plan, 1, {SaMode::kMasked, 24});
  const MaskedUpdate b_ideal = Encode(g, plan, 1, {});
  const MaskedUpdate b_scale = Encode(g, plan, 1, {SaMode::kMasked, 16});
  const auto layout = FlatLayout(1);
  EXPECT_EQ(ErrorCodeOf([&] {
              AggregateDecode(std::vector<MaskedUpdate>{a}, plan, layout);
            }),
            ErrorCode::kProtocol);
  EXPECT_EQ(ErrorCodeOf([&] {
              AggregateDecode(std::vector<MaskedUpdate>{a, a}, plan, layout);
            }),
            ErrorCode::kProtocol);
  EXPECT_EQ(ErrorCodeOf([&] {
              AggregateDecode(std::vector<MaskedUpdate>{a, b_ideal}, plan,
                              layout);
            }),
            ErrorCode::kContract);
  EXPECT_EQ(ErrorCodeOf([&] {
              AggregateDecode(std::vector<MaskedUpdate>{a, b_scale}, plan,
                              layout);
            }),
            ErrorCode::kContract);
  EXPECT_EQ(AggregateDecode(std::vector<MaskedUpdate>{b, a}, plan, layout)
                .Flatten()[0],
            2.0);
  EXPECT_EQ(ErrorCodeOf([&] { Encode(g, plan, 5, {}); }), ErrorCode::kProtocol);
}

TEST(WireFormatTest, LayoutIsLittleEndianWithHeader) {
  MaskedUpdate up{0x01020304, SaMode::kMasked, 24, {0x1122334455667788ULL}};
  const auto bytes = SerializeMaskedUpdate(up);
  const std::vector<std::uint8_t> expected{
      0x04, 0x03, 0x02, 0x01,                          // client id
      0x01,                                            // mode
      24,                                              // k
      1,    0,    0,    0,    0,    0,    0,    0,     // length
      0x88, 0x77, 0x66, 0x55, 0x44, 0x33, 0x22, 0x11,  // payload
  };
  EXPECT_EQ(bytes, expected);
  EXPECT_EQ(ParseMaskedUpdate(bytes), up);
}

TEST(WireFormatTest, RoundTripsRealPayloadAndRejectsDamage) {
  const MaskPlan plan({0, 1}, 2);
  const MaskedUpdate up =
      Encode(FlatSet({-0.0, 1e-308, 3.25}), plan, 1, {SaMode::kIdeal, 24});
  auto bytes = SerializeMaskedUpdate(up);
  EXPECT_EQ(ParseMaskedUpdate(bytes), up);
  bytes.pop_back();
  EXPECT_EQ(ErrorCodeOf([&] { ParseMaskedUpdate(bytes); }), ErrorCode::kFormat);
  bytes = SerializeMaskedUpdate(up);
  bytes[4] = 7;
  EXPECT_EQ(ErrorCodeOf([&] { ParseMaskedUpdate(bytes); }), ErrorCode::kFormat);
}

}  // namespace
}  // namespace labelfish
