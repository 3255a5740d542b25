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

#ifndef LABELFISH_ATTACK_H_
#define LABELFISH_ATTACK_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "labelfish/federation.h"
#include "labelfish/nn.h"
#include "labelfish/secure_agg.h"
#include "labelfish/tensor.h"

namespace labelfish {

// How the per-client constant is spread over the modified layer's bias.
// kConstant writes C^u to every entry. kPerFeature writes C^u * r^u_j with a
// seeded r^u_j ~ U(pattern_lo, pattern_hi); the constant form leaves the
// embeddings of different clients nearly collinear once a ReLU follows.
enum class FishingPolicy { kPerFeature, kConstant };

std::string_view FishingPolicyName(FishingPolicy policy);
FishingPolicy ParseFishingPolicy(std::string_view name);

struct FishingOptions {
  FishingPolicy policy = FishingPolicy::kPerFeature;
  std::uint64_t seed = 0;
  double min_rcond = 1e-8;
  int max_retries = 16;
  double pattern_lo = 0.2;
  double pattern_hi = 1.8;
};

struct FishingKit {
  ClientId client_id = 0;
  Model model;
  double constant = 0.0;
  std::vector<double> bias_pattern;  // values written to the modified bias
  std::size_t modified_layer = 0;
  std::vector<double> embedding;  // FCL input, m
  std::vector<double> logits;     // FCL output, n
};

struct FishingPlan {
  std::vector<FishingKit> kits;
  double rcond = 0.0;  // of the disaggregation matrix
  int retries = 0;

  std::vector<ClientId> client_ids() const;
  std::vector<Model> models() const;
};

// Index of the layer a fishing model rewrites: the first BatchNorm, or for
// networks without one the first FullyConnected layer that is not the head.
std::size_t FindModifiableLayer(const Model& base);

// Copy of `base` whose layer `layer` outputs `pattern` for every input.
// BatchNorm gets gamma = 0, beta = pattern; FullyConnected gets W = 0,
// b = pattern.
Model MakeFishingModel(const Model& base, std::size_t layer,
                       std::span<const double> pattern);

// FCL input and output of `model` on an all-zeros and an all-ones sample.
// Throws a data-agnosticism error if the two differ.
std::pair<std::vector<double>, std::vector<double>> PresetProbe(
    const Model& model);

// Builds one kit per client and checks the disaggregation matrix. Each kit
// is also probed with a batch of two random inputs. Constants start at
// 0.5 + 0.1 * rank and are redrawn from U(0.1, 2) while the reciprocal
// condition number stays below options.min_rcond.
FishingPlan BuildFishingModels(const Model& base,
                               std::span<const ClientId> client_ids,
                               const FishingOptions& options);

// (m+1) x U: first row ones, column u below it the embedding of client u.
Matrix DisaggregationMatrix(std::span<const std::vector<double>> embeddings);

struct Disaggregation {
  Matrix bias_grads;  // U x n, row u = recovered bias gradient of client u
  double rcond = 0.0;
  double residual_norm = 0.0;
};

// Splits the aggregated head gradients into per-client bias gradients with a
// single least-squares factorization shared by every class.
Disaggregation Disaggregate(const Matrix& agg_weight,
                            std::span<const double> agg_bias,
                            std::span<const std::vector<double>> embeddings,
                            double min_rcond = 1e-8);

struct InferredCounts {
  LabelCounts counts;
  std::vector<double> real_counts;
  int sum_mismatch = 0;  // sum(counts) - B
};

// Counts from a bias gradient when every sample produced the same logits:
// B * softmax(y) - B * grad, rounded and clamped to [0, B]. With `repair`
// the rounding is replaced by a largest-remainder split that sums to B.
InferredCounts InferLabels(std::span<const double> bias_grad,
                           std::span<const double> logits,
                           std::size_t batch_size, bool repair = false);

// Label of a single-sample bias gradient: its only non-positive entry.
int SingleSampleLabel(std::span<const double> bias_grad);

// Counts from a bias gradient and the true per-sample logits (B x n).
LabelCounts CountsFromLogits(std::span<const double> bias_grad,
                             const Matrix& per_sample_logits);

struct AttackResult {
  ClientId client_id = 0;
  std::vector<double> bias_grad;
  std::vector<double> real_counts;
  LabelCounts counts;
  int sum_mismatch = 0;
  double residual_norm = 0.0;
  double rcond = 0.0;
};

// Recovers every kit's label counts from the aggregate alone.
std::vector<AttackResult> RunAttack(const GradientSet& aggregate,
                                    const FishingPlan& plan,
                                    std::size_t batch_size,
                                    bool repair = false);
// Same, reading only record.aggregate (never the per-client gradients).
std::vector<AttackResult> RunAttack(const RoundRecord& record,
                                    const FishingPlan& plan,
                                    bool repair = false);

}  // namespace labelfish

#endif  // LABELFISH_ATTACK_H_
