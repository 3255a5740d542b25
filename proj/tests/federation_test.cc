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

#include "labelfish/federation.h"

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "labelfish/attack.h"
#include "labelfish/error.h"
#include "test_util.h"

namespace labelfish {
namespace {

using ::labelfish::testing::ErrorCodeOf;
using ::labelfish::testing::MaxAbsDiff;

std::shared_ptr<const Dataset> SmallPool(std::size_t dim = 6) {
  return std::make_shared<const Dataset>(GenerateSynthetic(
      {.num_classes = 4, .sample_shape = {dim}, .count = 400, .seed = 3}));
}

FederationState SmallState(std::uint64_t seed = 1) {
  return FederationState{MakeFcn3(6, 8, 5, 4, 2),
                         PartitionClients(SmallPool(), 10, 0.0, seed), seed, 0};
}

TEST(SampleRoundClientsTest, ForcedSingleClient) {
  Rng rng(1);
  EXPECT_EQ(SampleRoundClients(1, 1, rng), (std::vector<ClientId>{0}));
}

TEST(SampleRoundClientsTest, DeterministicDistinctSorted) {
  Rng a(9), b(9);
  const auto ids = SampleRoundClients(100, 5, a);
  EXPECT_EQ(ids, SampleRoundClients(100, 5, b));
  ASSERT_EQ(ids.size(), 5u);
  for (std::size_t i = 1; i < ids.size(); ++i) EXPECT_LT(ids[i - 1], ids[i]);
  EXPECT_LT(ids.back(), 100u);
}

TEST(SampleRoundClientsTest, FrequenciesWithinBinomialBound) {
  Rng rng(4);
  constexpr int kDraws = 10000;
  std::vector<int> hits(10, 0);
  for (int t = 0; t < kDraws; ++t) {
    for (ClientId id : SampleRoundClients(10, 3, rng)) ++hits[id];
  }
  const double sigma = std::sqrt(kDraws * 0.3 * 0.7);
  for (int h : hits) EXPECT_LT(std::abs(h - kDraws * 0.3), 5 * sigma);
}

TEST(SampleRoundClientsTest, TooManyIsDomainError) {
  Rng rng(1);
  EXPECT_EQ(ErrorCodeOf([&] { SampleRoundClients(3, 4, rng); }),
            ErrorCode::kDomain);
}

TEST(ClientDatasetTest, BatchCountsMatchLabels) {
  const auto clients = PartitionClients(SmallPool(), 3, 0.0, 1);
  Rng rng(2);
  const ClientBatch batch = clients[1].DrawBatch(50, rng);
  EXPECT_EQ(batch.inputs.shape(), (Shape{50, 6}));
  EXPECT_EQ(batch.true_counts, CountLabels(batch.labels, 4));
  EXPECT_EQ(batch.true_counts.total(), 50);
}

TEST(ClientDatasetTest, DirichletSkewConcentratesLabels) {
  const auto clients = PartitionClients(SmallPool(), 20, 0.05, 1);
  double max_weight_sum = 0.0;
  for (const auto& c : clients) {
    max_weight_sum +=
        *std::max_element(c.class_weights().begin(), c.class_weights().end());
  }
  // Small alpha puts most of each client's mass on one class.
  EXPECT_GT(max_weight_sum / 20.0, 0.8);
  const auto uniform = PartitionClients(SmallPool(), 2, 0.0, 1);
  for (double w : uniform[0].class_weights()) EXPECT_EQ(w, 0.25);
}

TEST(ClientLocalStepTest, RepeatedSampleEqualsSingleSample) {
  const Model model = MakeFcn3(6, 8, 5, 4, 7);
  std::mt19937_64 rng(3);
  const Tensor one = testing::RandomTensor({1, 6}, rng);
  std::vector<double> rep;
  for (int k = 0; k < 4; ++k)
    rep.insert(rep.end(), one.values().begin(), one.values().end());
  const ClientBatch single{one, {2}, CountLabels(std::vector<int>{2}, 4)};
  const ClientBatch many{Tensor({4, 6}, rep),
                         {2, 2, 2, 2},
                         CountLabels(std::vector<int>{2, 2, 2, 2}, 4)};
  const auto a = ClientLocalStep(model, single).Flatten();
  const auto b = ClientLocalStep(model, many).Flatten();
  EXPECT_LT(MaxAbsDiff(a, b), 1e-15);
}

TEST(ClientLocalStepTest, MixedPairIsMeanOfSingles) {
  // Batch-norm couples samples in train mode, so this uses the FCN only.
  std::mt19937_64 rng(4);
  const Model fcn = MakeFcn3(6, 8, 5, 4, 7);
  const Tensor x = testing::RandomTensor({2, 6}, rng);
  const std::vector<int> labels{0, 3};
  const auto pair =
      ClientLocalStep(fcn, {x, labels, CountLabels(labels, 4)}).Flatten();
  std::vector<double> mean(pair.size(), 0.0);
  for (std::size_t k = 0; k < 2; ++k) {
    const Tensor xk({1, 6},
                    std::vector<double>(x.values().begin() + 6 * k,
                                        x.values().begin() + 6 * (k + 1)));
    const std::vector<int> lk{labels[k]};
    const auto g = ClientLocalStep(fcn, {xk, lk, CountLabels(lk, 4)}).Flatten();
    for (std::size_t i = 0; i < g.size(); ++i) mean[i] += 0.5 * g[i];
  }
  EXPECT_LT(MaxAbsDiff(pair, mean), 1e-12);
}

TEST(ClientLocalStepTest, FishingModelZeroesUpstreamGradients) {
  for (const Model& base :
       {MakeFcn3(6, 8, 5, 4, 1), MakeCnnBn({1, 5, 5}, 3, 3, 6, 4, 1)}) {
    const std::size_t layer = FindModifiableLayer(base);
    const std::size_t width = base.layer(layer).params[1].size();
    const Model fishing =
        MakeFishingModel(base, layer, std::vector<double>(width, 0.7));
    std::mt19937_64 rng(5);
    Shape shape{8};
    shape.insert(shape.end(), base.input_shape().begin(),
                 base.input_shape().end());
    const Tensor x = testing::RandomTensor(shape, rng);
    const auto labels = testing::RandomLabels(8, 4, rng);
    const GradientSet g =
        ClientLocalStep(fishing, {x, labels, CountLabels(labels, 4)});
    for (std::size_t l = 0; l < layer; ++l) {
      for (const Tensor& t : g.layers()[l]) {
        for (double v : t.values()) ASSERT_EQ(v, 0.0) << "layer " << l;
      }
    }
  }
}

TEST(ServerUpdateTest, ZeroRateScalingAndOracle) {
  const Model base = MakeFcn3(6, 8, 5, 4, 3);
  std::mt19937_64 rng(6);
  GradientSet g = GradientSet::ZerosLike(base);
  auto flat = g.Flatten();
  for (double& v : flat) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  g.Unflatten(flat);

  Model same = base;
  ServerUpdate(same, g, 0.0, 3);
  EXPECT_EQ(same, base);

  GradientSet scaled = g;
  scaled *= 3.0;
  Model stepped = base;
  ServerUpdate(stepped, scaled, 0.1, 3);
  Model oracle = base;
  std::size_t k = 0;
  for (auto& layer : oracle.mutable_layers()) {
    for (Tensor& t : layer.params) {
      for (double& w : t.data()) {
        w = w - 0.1 * (3.0 * flat[k]) / 3.0;
        ++k;
      }
    }
  }
  std::size_t checked = 0;
  for (std::size_t l = 0; l < base.layers().size(); ++l) {
    for (std::size_t p = 0; p < base.layer(l).params.size(); ++p) {
      const auto a = stepped.layer(l).params[p].values();
      const auto b = oracle.layer(l).params[p].values();
      const auto w0 = base.layer(l).params[p].values();
      for (std::size_t i = 0; i < a.size(); ++i, ++checked) {
        ASSERT_NEAR(a[i], b[i], 1e-15);
        // The step is -lr * G when the aggregate is U * G.
        ASSERT_NEAR(a[i] - w0[i], -0.1 * flat[checked], 1e-15);
      }
    }
  }
  EXPECT_EQ(ErrorCodeOf([&] {
              ServerUpdate(stepped,
                           GradientSet::ZerosLike(MakeFcn3(6, 9, 5, 4, 1)), 0.1,
                           1);
            }),
            ErrorCode::kShape);
}

TEST(RunRoundTest, SingleClientAggregateIsThatClient) {
  FederationState state = SmallState();
  RoundConfig config{.clients_per_round = 1, .batch_size = 16};
  const RoundRecord rec = RunRound(state, config);
  ASSERT_EQ(rec.clients.size(), 1u);
  EXPECT_EQ(rec.aggregate, rec.client_gradients[0]);
  EXPECT_EQ(state.round, 1u);
}

TEST(RunRoundTest, AggregateIsSumOfClients) {
  FederationState state = SmallState();
  RoundConfig config{.clients_per_round = 3, .batch_size = 16};
  const Model before = state.global;
  const RoundRecord rec = RunRound(state, config);
  std::vector<double> sum(rec.aggregate.size(), 0.0);
  for (const auto& g : rec.client_gradients) {
    const auto f = g.Flatten();
    for (std::size_t i = 0; i < f.size(); ++i) sum[i] += f[i];
  }
  EXPECT_LT(MaxAbsDiff(rec.aggregate.Flatten(), sum), 1e-9);
  for (const Model& m : rec.models) EXPECT_EQ(m, before);
  Model expected = before;
  ServerUpdate(expected, rec.aggregate, config.learning_rate, 3);
  EXPECT_EQ(state.global, expected);
}

TEST(RunRoundTest, MaskedModeMatchesIdealWithinBound) {
  FederationState ideal = SmallState(), masked = SmallState();
  RoundConfig config{.clients_per_round = 4, .batch_size = 8};
  const RoundRecord a = RunRound(ideal, config);
  config.secure_agg.mode = SaMode::kMasked;
  const RoundRecord b = RunRound(masked, config);
  EXPECT_EQ(a.clients, b.clients);
  EXPECT_EQ(a.client_gradients, b.client_gradients);
  EXPECT_LE(MaxAbsDiff(a.aggregate.Flatten(), b.aggregate.Flatten()),
            4.0 / (2.0 * ScaleFactor(kDefaultScaleBits)) + 1e-12);
}

TEST(RunRoundTest, DeterministicAndBenignReplaySeesSameBatches) {
  FederationState s1 = SmallState(5), s2 = SmallState(5);
  RoundConfig config{.clients_per_round = 3, .batch_size = 12};
  const RoundRecord r1 = RunRound(s1, config);
  const RoundRecord r2 = RunRound(s2, config);
  EXPECT_EQ(r1, r2);
  const RoundRecord next = RunRound(s1, config);
  EXPECT_EQ(next.round, 1u);
}

TEST(RunRoundTest, AttackHookModelsDifferOnlyInModifiedLayer) {
  FederationState state = SmallState();
  const Model base = state.global;
  RoundConfig config{.clients_per_round = 3, .batch_size = 10};
  FishingPlan plan;
  auto hook = [&](const Model& m, std::span<const ClientId> ids) {
    plan = BuildFishingModels(m, ids, {});
    return plan.models();
  };
  const RoundRecord rec = RunRound(state, config, hook);
  const std::size_t layer = FindModifiableLayer(base);
  for (const Model& m : rec.models) {
    for (std::size_t l = 0; l < base.layers().size(); ++l) {
      if (l == layer) {
        EXPECT_NE(m.layer(l), base.layer(l));
      } else {
        EXPECT_EQ(m.layer(l), base.layer(l));
      }
    }
  }
}

TEST(RunRoundTest, AttackRejectsTooManyClients) {
  FederationState state = SmallState();  // embedding dim 5
  RoundConfig config{.clients_per_round = 7, .batch_size = 4};
  auto hook = [](const Model& m, std::span<const ClientId> ids) {
    return std::vector<Model>(ids.size(), m);
  };
  EXPECT_EQ(ErrorCodeOf([&] { RunRound(state, config, hook); }),
            ErrorCode::kConfig);
  config.clients_per_round = 6;
  EXPECT_NO_THROW(RunRound(state, config, hook));
}

TEST(RunRoundTest, DefenseHookSeesEveryClient) {
  FederationState state = SmallState();
  RoundConfig config{.clients_per_round = 3, .batch_size = 4};
  std::vector<ClientId> seen;
  auto defense = [&](const GradientSet& g, std::uint64_t, ClientId id) {
    seen.push_back(id);
    GradientSet out = g;
    out *= 0.0;
    return out;
  };
  const RoundRecord rec = RunRound(state, config, nullptr, defense);
  EXPECT_EQ(seen, rec.clients);
  for (double v : rec.aggregate.Flatten()) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace labelfish
