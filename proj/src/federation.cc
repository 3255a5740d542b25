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

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "labelfish/error.h"

namespace labelfish {

int LabelCounts::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0);
}

LabelCounts CountLabels(std::span<const int> labels, std::size_t num_classes) {
  LabelCounts out{std::vector<int>(num_classes, 0)};
  for (int c : labels) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw Error(ErrorCode::kDomain, "label " + std::to_string(c) +
                                          " outside [0, " +
                                          std::to_string(num_classes) + ")");
    }
    ++out.counts[static_cast<std::size_t>(c)];
  }
  return out;
}

ClientDataset::ClientDataset(ClientId id, std::shared_ptr<const Dataset> pool,
                             std::vector<double> class_weights)
    : id_(id),
      pool_(std::move(pool)),
      class_weights_(std::move(class_weights)) {
  if (pool_ == nullptr || pool_->size() == 0) {
    throw Error(ErrorCode::kDomain, "client needs a non-empty sample pool");
  }
  const std::size_t n = pool_->num_classes;
  auto by_class = std::make_shared<std::vector<std::vector<std::size_t>>>(n);
  for (std::size_t i = 0; i < pool_->size(); ++i) {
    const int c = pool_->labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= n) {
      throw Error(ErrorCode::kDomain,
                  "pool label " + std::to_string(c) + " out of range");
    }
    (*by_class)[static_cast<std::size_t>(c)].push_back(i);
  }
  if (class_weights_.empty()) class_weights_.assign(n, 1.0);
  if (class_weights_.size() != n) {
    throw Error(ErrorCode::kShape, "class weights need one entry per class");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    if (!(class_weights_[c] >= 0.0)) {
      throw Error(ErrorCode::kDomain, "class weights must be >= 0");
    }
    if ((*by_class)[c].empty()) class_weights_[c] = 0.0;
    total += class_weights_[c];
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kDomain,
                "client " + std::to_string(id) + " has no drawable class");
  }
  for (double& w : class_weights_) w /= total;
  by_class_ = std::move(by_class);
}

ClientBatch ClientDataset::DrawBatch(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0) {
    throw Error(ErrorCode::kDomain, "batch size must be >= 1");
  }
  const Dataset& pool = *pool_;
  const std::size_t width = pool.sample_size();
  std::discrete_distribution<int> pick_class(class_weights_.begin(),
                                             class_weights_.end());
  ClientBatch batch;
  batch.labels.resize(batch_size);
  std::vector<double> values(batch_size * width);
  for (std::size_t k = 0; k < batch_size; ++k) {
    const int c = pick_class(rng);
    const auto& members = (*by_class_)[static_cast<std::size_t>(c)];
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    const std::size_t idx = members[pick(rng)];
    batch.labels[k] = c;
    const auto src = pool.sample(idx);
    std::copy(src.begin(), src.end(),
              values.begin() + static_cast<std::ptrdiff_t>(k * width));
  }
  Shape shape{batch_size};
  const Shape sample_shape = pool.sample_shape();
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  batch.inputs = Tensor(std::move(shape), std::move(values));
  batch.true_counts = CountLabels(batch.labels, pool.num_classes);
  return batch;
}

std::vector<ClientDataset> PartitionClients(std::shared_ptr<const Dataset> pool,
                                            std::size_t num_clients,
                                            double alpha, std::uint64_t seed) {
  if (num_clients == 0) {
    throw Error(ErrorCode::kDomain, "need at least one client");
  }
  std::vector<ClientDataset> clients;
  clients.reserve(num_clients);
  Rng rng = MakeRng(seed, {Tag(Stream::kPartition), 2});
  for (std::size_t u = 0; u < num_clients; ++u) {
    std::vector<double> weights;
    if (alpha > 0.0) {
      std::gamma_distribution<double> gamma(alpha, 1.0);
      weights.resize(pool->num_classes);
      for (double& w : weights) w = gamma(rng);
      // Tiny alpha can underflow every draw; fall back to one class.
      if (std::all_of(weights.begin(), weights.end(),
                      [](double w) { return w == 0.0; })) {
        std::uniform_int_distribution<std::size_t> pick(0, weights.size() - 1);
        weights[pick(rng)] = 1.0;
      }
    }
    clients.emplace_back(static_cast<ClientId>(u), pool, std::move(weights));
  }
  return clients;
}

std::vector<ClientId> SampleRoundClients(std::size_t total, std::size_t count,
                                         Rng& rng) {
  if (count == 0 || count > total) {
    throw Error(ErrorCode::kDomain, "cannot select " + std::to_string(count) +
                                        " of " + std::to_string(total) +
                                        " clients");
  }
  std::vector<ClientId> all(total);
  std::iota(all.begin(), all.end(), ClientId{0});
  std::vector<ClientId> chosen;
  chosen.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), count, rng);
  return chosen;
}

GradientSet ClientLocalStep(const Model& model, const ClientBatch& batch) {
  const ForwardTrace trace = Forward(model, batch.inputs, Mode::kTrain);
  return Backward(model, trace, batch.labels);
}

void ServerUpdate(Model& model, const GradientSet& aggregate,
                  double learning_rate, std::size_t num_clients) {
  if (num_clients == 0) {
    throw Error(ErrorCode::kDomain, "server update needs >= 1 client");
  }
  GradientSet::ZerosLike(model).CheckSameLayout(aggregate);
  const double step = learning_rate / static_cast<double>(num_clients);
  auto& layers = model.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t p = 0; p < layers[l].params.size(); ++p) {
      auto w = layers[l].params[p].data();
      const auto g = aggregate.layers()[l][p].data();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * g[i];
    }
  }
}

RoundRecord RunRound(FederationState& state, const RoundConfig& config,
                     const AttackHook& attack, const DefenseHook& defense) {
  const std::size_t u_count = config.clients_per_round;
  if (attack && u_count > state.global.embedding_dim() + 1) {
    throw Error(ErrorCode::kConfig,
                "attack needs clients per round <= embedding dim + 1 (" +
                    std::to_string(state.global.embedding_dim() + 1) +
                    "), got " + std::to_string(u_count));
  }

  RoundRecord record;
  record.round = state.round;
  record.batch_size = config.batch_size;
  record.sa_mode = config.secure_agg.mode;
  record.scale_bits = config.secure_agg.scale_bits;

  Rng select_rng =
      MakeRng(state.seed, {Tag(Stream::kClientSelection), state.round});
  record.clients =
      SampleRoundClients(state.clients.size(), u_count, select_rng);

  if (attack) {
    record.models = attack(state.global, record.clients);
    if (record.models.size() != u_count) {
      throw Error(ErrorCode::kContract,
                  "attack hook returned " +
                      std::to_string(record.models.size()) + " models for " +
                      std::to_string(u_count) + " clients");
    }
    for (const Model& m : record.models) state.global.CheckSameArchitecture(m);
  } else {
    record.models.assign(u_count, state.global);
  }

  const MaskPlan plan(
      record.clients,
      DeriveSeed(state.seed, {Tag(Stream::kMask), state.round}));
  std::vector<MaskedUpdate> updates;
  updates.reserve(u_count);
  for (std::size_t j = 0; j < u_count; ++j) {
    const ClientId id = record.clients[j];
    Rng batch_rng = MakeRng(state.seed, {Tag(Stream::kBatch), state.round, id});
    const ClientBatch batch =
        state.clients.at(id).DrawBatch(config.batch_size, batch_rng);
    GradientSet grads = ClientLocalStep(record.models[j], batch);
    if (defense) grads = defense(grads, state.round, id);
    updates.push_back(Encode(grads, plan, id, config.secure_agg));
    record.true_counts.push_back(batch.true_counts);
    record.client_gradients.push_back(std::move(grads));
  }

  record.aggregate = AggregateDecode(
      updates, plan, GradientSet::ZerosLike(state.global).Layout());
  ServerUpdate(state.global, record.aggregate, config.learning_rate, u_count);
  ++state.round;
  return record;
}

}  // namespace labelfish
