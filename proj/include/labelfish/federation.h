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

#ifndef LABELFISH_FEDERATION_H_
#define LABELFISH_FEDERATION_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "labelfish/data.h"
#include "labelfish/nn.h"
#include "labelfish/random.h"
#include "labelfish/secure_agg.h"

namespace labelfish {

// Per-class sample counts of one batch.
struct LabelCounts {
  std::vector<int> counts;

  int total() const;
  friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

LabelCounts CountLabels(std::span<const int> labels, std::size_t num_classes);

struct ClientBatch {
  Tensor inputs;  // [B, sample_shape...]
  std::vector<int> labels;
  LabelCounts true_counts;  // evaluation only
};

// A client's private data: a label distribution over a shared sample pool.
// Batches draw a class from `class_weights` (uniform when empty), then a
// uniformly random pool sample of that class, with replacement.
class ClientDataset {
 public:
  ClientDataset(ClientId id, std::shared_ptr<const Dataset> pool,
                std::vector<double> class_weights = {});

  ClientId id() const { return id_; }
  const Dataset& pool() const { return *pool_; }
  const std::vector<double>& class_weights() const { return class_weights_; }

  ClientBatch DrawBatch(std::size_t batch_size, Rng& rng) const;

 private:
  ClientId id_;
  std::shared_ptr<const Dataset> pool_;
  std::vector<double> class_weights_;
  std::shared_ptr<const std::vector<std::vector<std::size_t>>> by_class_;
};

// Splits a pool into `num_clients` clients. alpha <= 0 gives every client a
// uniform label distribution; alpha > 0 draws each client's distribution
// from Dirichlet(alpha).
std::vector<ClientDataset> PartitionClients(std::shared_ptr<const Dataset> pool,
                                            std::size_t num_clients,
                                            double alpha, std::uint64_t seed);

// `count` distinct ids from [0, total), in increasing order.
std::vector<ClientId> SampleRoundClients(std::size_t total, std::size_t count,
                                         Rng& rng);

// One batch-averaged gradient step of an honest client.
GradientSet ClientLocalStep(const Model& model, const ClientBatch& batch);

// W <- W - lr * agg / num_clients.
void ServerUpdate(Model& model, const GradientSet& aggregate,
                  double learning_rate, std::size_t num_clients);

struct RoundConfig {
  std::size_t clients_per_round = 5;
  std::size_t batch_size = 64;
  double learning_rate = 0.1;
  SecureAggConfig secure_agg;
};

struct FederationState {
  Model global;
  std::vector<ClientDataset> clients;
  std::uint64_t seed = 0;
  std::uint64_t round = 0;
};

// Returns the model sent to each selected client (same order as `ids`).
using AttackHook = std::function<std::vector<Model>(
    const Model& base, std::span<const ClientId> ids)>;
// Client-side transformation of gradients before encoding.
using DefenseHook = std::function<GradientSet(
    const GradientSet& grads, std::uint64_t round, ClientId id)>;

struct RoundRecord {
  std::uint64_t round = 0;
  std::size_t batch_size = 0;
  SaMode sa_mode = SaMode::kIdeal;
  int scale_bits = 0;
  std::vector<ClientId> clients;
  std::vector<LabelCounts> true_counts;
  // Submitted (post-defense) gradients. Withheld from the attacker; kept
  // for oracle checks and metrics.
  std::vector<GradientSet> client_gradients;
  GradientSet aggregate;
  std::vector<Model> models;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

// One FedSGD round: select clients, distribute models (fishing models when
// `attack` is set), collect defended and encoded gradients, decode the sum
// and update state.global. Client selection, batches and masks depend only
// on (state.seed, state.round), so a benign replay of the same state sees
// identical clients and batches.
RoundRecord RunRound(FederationState& state, const RoundConfig& config,
                     const AttackHook& attack = nullptr,
                     const DefenseHook& defense = nullptr);

}  // namespace labelfish

#endif  // LABELFISH_FEDERATION_H_
