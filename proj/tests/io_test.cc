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

#include "labelfish/io.h"

#include <bit>
#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>

#include "gtest/gtest.h"
#include "labelfish/error.h"
#include "test_util.h"

namespace labelfish {
namespace {

using ::labelfish::testing::ErrorCodeOf;

bool BitIdentical(const Model& a, const Model& b) {
  if (!(a == b)) return false;
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    const auto& pa = a.layer(l).params;
    const auto& pb = b.layer(l).params;
    for (std::size_t p = 0; p < pa.size(); ++p) {
      for (std::size_t i = 0; i < pa[p].size(); ++i) {
        if (std::bit_cast<std::uint64_t>(pa[p][i]) !=
            std::bit_cast<std::uint64_t>(pb[p][i])) {
          return false;
        }
      }
    }
  }
  return true;
}

TEST(ModelIoTest, RoundTripsBitExactly) {
  Model cnn = MakeCnnBn({2, 7, 7}, 3, 3, 9, 4, 5);
  // Values that print badly in decimal or carry a sign on zero.
  cnn.mutable_layers()[0].params[0].data()[0] = -0.0;
  cnn.mutable_layers()[0].params[0].data()[1] = std::nextafter(0.1, 1.0);
  cnn.mutable_layers()[0].params[0].data()[2] =
      std::numeric_limits<double>::denorm_min();
  cnn.mutable_layers()[1].buffers[1].data()[0] = 2.5;
  for (const Model& m : {cnn, MakeFcn3(9, 7, 5, 3, 1)}) {
    const auto bytes = SerializeModel(m);
    const Model back = ParseModel(bytes);
    EXPECT_TRUE(BitIdentical(m, back));
    EXPECT_EQ(SerializeModel(back), bytes);
  }
}

TEST(ModelIoTest, FilesRoundTrip) {
  const Model m = MakeFcn3(4, 3, 3, 2, 8);
  const auto path =
      std::filesystem::temp_directory_path() / "labelfish_model.bin";
  SaveModel(m, path);
  EXPECT_TRUE(BitIdentical(LoadModel(path), m));
  std::filesystem::remove(path);
  EXPECT_EQ(ErrorCodeOf([&] { LoadModel(path); }), ErrorCode::kIo);
}

TEST(ModelIoTest, RejectsDamage) {
  auto bytes = SerializeModel(MakeFcn3(4, 3, 3, 2, 8));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_EQ(ErrorCodeOf([&] { ParseModel(truncated); }), ErrorCode::kFormat);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(ErrorCodeOf([&] { ParseModel(bad_magic); }), ErrorCode::kFormat);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(ErrorCodeOf([&] { ParseModel(trailing); }), ErrorCode::kFormat);
}

TEST(RoundRecordIoTest, RoundTrips) {
  auto pool = std::make_shared<const Dataset>(GenerateSynthetic(
      {.num_classes = 3, .sample_shape = {1, 5, 5}, .count = 60}));
  FederationState state{MakeCnnBn({1, 5, 5}, 2, 3, 4, 3, 1),
                        PartitionClients(pool, 6, 0.0, 2), 2, 0};
  FishingPlan plan;
  auto hook = [&](const Model& m, std::span<const ClientId> ids) {
    plan = BuildFishingModels(m, ids, {});
    return plan.models();
  };
  const RoundRecord rec = RunRound(state,
                                   {.clients_per_round = 3,
                                    .batch_size = 5,
                                    .secure_agg = {SaMode::kMasked, 20}},
                                   hook);
  const auto bytes = SerializeRoundRecord(rec);
  const RoundRecord back = ParseRoundRecord(bytes);
  EXPECT_EQ(back, rec);
  EXPECT_EQ(SerializeRoundRecord(back), bytes);
  // Replay: the attack on the loaded record gives the same answer.
  EXPECT_EQ(RunAttack(back, plan)[1].counts, RunAttack(rec, plan)[1].counts);
}

TEST(AttackResultJsonTest, RoundTrips) {
  std::vector<AttackResult> results(2);
  results[0] = {4,        {0.1, -0.2}, {1.0000000000000002, 2.9999999999999996},
                {{1, 3}}, 0,           1e-17,
                0.25};
  results[1] = {9, {0.3, 0.0}, {0.0, 4.0}, {{0, 4}}, -1, 0.0, 1.0};
  const std::string json = AttackResultsToJson(results);
  const auto back = AttackResultsFromJson(json);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].client_id, 4u);
  EXPECT_EQ(back[0].real_counts, results[0].real_counts);
  EXPECT_EQ(back[0].bias_grad, results[0].bias_grad);
  EXPECT_EQ(back[1].counts, results[1].counts);
  EXPECT_EQ(back[1].sum_mismatch, -1);
  EXPECT_EQ(back[0].residual_norm, 1e-17);
  EXPECT_EQ(ErrorCodeOf([] { AttackResultsFromJson("[{\"client_id\": 1}]"); }),
            ErrorCode::kFormat);
}

}  // namespace
}  // namespace labelfish
