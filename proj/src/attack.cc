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

#include "labelfish/attack.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "labelfish/error.h"
#include "labelfish/random.h"

namespace labelfish {

namespace {

std::size_t ModifiedWidth(const Model& base, std::size_t layer) {
  const LayerSpec& spec = base.layer(layer).spec;
  if (const auto* bn = std::get_if<BatchNorm>(&spec)) return bn->features;
  return std::get<FullyConnected>(spec).out;
}

// Embedding and logit rows of a forward pass over `inputs`; throws unless
// every row equals the first.
std::pair<std::vector<double>, std::vector<double>> ProbeRows(
    const Model& model, const Tensor& inputs, const char* what) {
  const ForwardTrace trace = Forward(model, inputs, Mode::kTrain);
  const Matrix e = trace.embeddings();
  const Matrix y = trace.logits();
  for (std::size_t r = 1; r < e.rows(); ++r) {
    if (!std::ranges::equal(e.row(r), e.row(0)) ||
        !std::ranges::equal(y.row(r), y.row(0))) {
      throw Error(
          ErrorCode::kDataAgnosticism,
          std::string(what) + ": fishing model outputs depend on the input");
    }
  }
  return {std::vector<double>(e.row(0).begin(), e.row(0).end()),
          std::vector<double>(y.row(0).begin(), y.row(0).end())};
}

double ReciprocalCondition(const Matrix& a) {
  return Lstsq(a, Matrix(a.rows(), 1)).rcond;
}

}  // namespace

std::string_view FishingPolicyName(FishingPolicy policy) {
  return policy == FishingPolicy::kConstant ? "constant" : "per_feature";
}

FishingPolicy ParseFishingPolicy(std::string_view name) {
  if (name == "per_feature") return FishingPolicy::kPerFeature;
  if (name == "constant") return FishingPolicy::kConstant;
  throw Error(ErrorCode::kConfig, "unknown fishing policy '" +
                                      std::string(name) +
                                      "' (expected per_feature or constant)");
}

std::vector<ClientId> FishingPlan::client_ids() const {
  std::vector<ClientId> ids;
  for (const FishingKit& kit : kits) ids.push_back(kit.client_id);
  return ids;
}

std::vector<Model> FishingPlan::models() const {
  std::vector<Model> out;
  for (const FishingKit& kit : kits) out.push_back(kit.model);
  return out;
}

std::size_t FindModifiableLayer(const Model& base) {
  const auto& layers = base.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (std::holds_alternative<BatchNorm>(layers[i].spec)) return i;
  }
  for (std::size_t i = 0; i < base.head_index(); ++i) {
    if (std::holds_alternative<FullyConnected>(layers[i].spec)) return i;
  }
  throw Error(ErrorCode::kArchitecture,
              "model has no BatchNorm or hidden FullyConnected layer to "
              "rewrite");
}

Model MakeFishingModel(const Model& base, std::size_t layer,
                       std::span<const double> pattern) {
  if (layer >= base.head_index()) {
    throw Error(ErrorCode::kArchitecture,
                "layer " + std::to_string(layer) + " cannot be rewritten");
  }
  const LayerSpec& spec = base.layer(layer).spec;
  if (!std::holds_alternative<BatchNorm>(spec) &&
      !std::holds_alternative<FullyConnected>(spec)) {
    throw Error(ErrorCode::kArchitecture, "layer " + std::to_string(layer) +
                                              " (" + LayerName(spec) +
                                              ") has no bias to rewrite");
  }
  if (pattern.size() != ModifiedWidth(base, layer)) {
    throw Error(ErrorCode::kShape,
                "fishing pattern has " + std::to_string(pattern.size()) +
                    " entries, layer needs " +
                    std::to_string(ModifiedWidth(base, layer)));
  }
  Model out = base;
  Layer& target = out.mutable_layers()[layer];
  // params[0] is gamma or W, params[1] beta or b.
  for (double& v : target.params[0].data()) v = 0.0;
  std::ranges::copy(pattern, target.params[1].data().begin());
  return out;
}

std::pair<std::vector<double>, std::vector<double>> PresetProbe(
    const Model& model) {
  Shape shape{2};
  shape.insert(shape.end(), model.input_shape().begin(),
               model.input_shape().end());
  const std::size_t width = ShapeSize(model.input_shape());
  std::vector<double> values(2 * width, 0.0);
  std::fill(values.begin() + static_cast<std::ptrdiff_t>(width), values.end(),
            1.0);
  return ProbeRows(model, Tensor(std::move(shape), std::move(values)),
                   "preset probe");
}

Matrix DisaggregationMatrix(std::span<const std::vector<double>> embeddings) {
  if (embeddings.empty()) {
    throw Error(ErrorCode::kDomain, "no embeddings");
  }
  const std::size_t m = embeddings.front().size();
  Matrix a(m + 1, embeddings.size());
  for (std::size_t u = 0; u < embeddings.size(); ++u) {
    if (embeddings[u].size() != m) {
      throw Error(ErrorCode::kShape, "embeddings differ in length");
    }
    a(0, u) = 1.0;
    for (std::size_t j = 0; j < m; ++j) a(j + 1, u) = embeddings[u][j];
  }
  return a;
}

FishingPlan BuildFishingModels(const Model& base,
                               std::span<const ClientId> client_ids,
                               const FishingOptions& options) {
  if (client_ids.empty()) {
    throw Error(ErrorCode::kDomain, "no clients to build fishing models for");
  }
  if (client_ids.size() > base.embedding_dim() + 1) {
    throw Error(ErrorCode::kConfig,
                std::to_string(client_ids.size()) +
                    " clients exceed embedding dim + 1 = " +
                    std::to_string(base.embedding_dim() + 1));
  }
  if (!(options.pattern_lo > 0.0 && options.pattern_hi >= options.pattern_lo)) {
    throw Error(ErrorCode::kConfig, "fishing pattern range must be positive");
  }
  const std::size_t layer = FindModifiableLayer(base);
  const std::size_t width = ModifiedWidth(base, layer);

  FishingPlan plan;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    plan.kits.clear();
    plan.retries = attempt;
    for (std::size_t rank = 0; rank < client_ids.size(); ++rank) {
      const ClientId id = client_ids[rank];
      Rng rng = MakeRng(options.seed, {Tag(Stream::kFishing), id,
                                       static_cast<std::uint64_t>(attempt)});
      double constant = 0.5 + 0.1 * static_cast<double>(rank);
      if (attempt > 0)
        constant = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
      std::vector<double> pattern(width, constant);
      if (options.policy == FishingPolicy::kPerFeature) {
        std::uniform_real_distribution<double> spread(options.pattern_lo,
                                                      options.pattern_hi);
        for (double& v : pattern) v = constant * spread(rng);
      }
      Model model = MakeFishingModel(base, layer, pattern);
      auto [embedding, logits] = PresetProbe(model);

      Rng probe_rng = MakeRng(options.seed, {Tag(Stream::kProbe), id});
      Shape shape{2};
      shape.insert(shape.end(), base.input_shape().begin(),
                   base.input_shape().end());
      Tensor probe(std::move(shape));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (double& v : probe.data()) v = unit(probe_rng);
      auto [e2, y2] = ProbeRows(model, probe, "random probe");
      if (e2 != embedding || y2 != logits) {
        throw Error(ErrorCode::kDataAgnosticism,
                    "fishing model for client " + std::to_string(id) +
                        " gives different outputs on zeros and random input");
      }
      plan.kits.push_back(FishingKit{id, std::move(model), constant,
                                     std::move(pattern), layer,
                                     std::move(embedding), std::move(logits)});
    }
    std::vector<std::vector<double>> embeddings;
    for (const FishingKit& kit : plan.kits) embeddings.push_back(kit.embedding);
    plan.rcond = ReciprocalCondition(DisaggregationMatrix(embeddings));
    if (plan.rcond >= options.min_rcond) return plan;
  }
  throw Error(ErrorCode::kConditioning,
              "disaggregation matrix stays ill-conditioned after " +
                  std::to_string(options.max_retries) + " retries (rcond " +
                  std::to_string(plan.rcond) + ")");
}

Disaggregation Disaggregate(const Matrix& agg_weight,
                            std::span<const double> agg_bias,
                            std::span<const std::vector<double>> embeddings,
                            double min_rcond) {
  const std::size_t n = agg_weight.rows();
  const std::size_t m = agg_weight.cols();
  if (agg_bias.size() != n) {
    throw Error(ErrorCode::kShape,
                "aggregate bias has " + std::to_string(agg_bias.size()) +
                    " entries, weight has " + std::to_string(n) + " rows");
  }
  if (embeddings.size() > m + 1) {
    throw Error(ErrorCode::kConfig, std::to_string(embeddings.size()) +
                                        " clients exceed embedding dim + 1 = " +
                                        std::to_string(m + 1));
  }
  const Matrix a = DisaggregationMatrix(embeddings);
  if (a.rows() != m + 1) {
    throw Error(ErrorCode::kShape,
                "embedding length differs from weight width");
  }
  // Column i stacks the class-i bias sum over the class-i weight row.
  Matrix rhs(m + 1, n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs(0, i) = agg_bias[i];
    for (std::size_t j = 0; j < m; ++j) rhs(j + 1, i) = agg_weight(i, j);
  }
  LstsqResult solved = Lstsq(a, rhs);
  if (solved.ill_conditioned || solved.rcond < min_rcond) {
    throw Error(ErrorCode::kConditioning,
                "disaggregation matrix rcond " + std::to_string(solved.rcond) +
                    " below " + std::to_string(min_rcond) + " (rank " +
                    std::to_string(solved.rank) + " of " +
                    std::to_string(a.cols()) + ")");
  }
  const Matrix fitted = MatMul(a, solved.solution);
  double residual = 0.0;
  for (std::size_t k = 0; k < fitted.data().size(); ++k) {
    const double d = fitted.data()[k] - rhs.data()[k];
    residual += d * d;
  }
  return Disaggregation{std::move(solved.solution), solved.rcond,
                        std::sqrt(residual)};
}

InferredCounts InferLabels(std::span<const double> bias_grad,
                           std::span<const double> logits,
                           std::size_t batch_size, bool repair) {
  if (batch_size == 0)
    throw Error(ErrorCode::kDomain, "batch size must be >= 1");
  if (bias_grad.size() != logits.size()) {
    throw Error(ErrorCode::kShape, "bias gradient and logits differ in length");
  }
  const std::size_t n = logits.size();
  const double b = static_cast<double>(batch_size);
  const std::vector<double> p = Softmax(logits);

  InferredCounts out;
  out.real_counts.resize(n);
  out.counts.counts.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.real_counts[i] = b * p[i] - b * bias_grad[i];
  }
  auto clamp = [b](double v) { return std::clamp(v, 0.0, b); };
  if (!repair) {
    for (std::size_t i = 0; i < n; ++i) {
      out.counts.counts[i] =
          static_cast<int>(clamp(std::nearbyint(out.real_counts[i])));
    }
  } else {
    std::vector<double> remainder(n);
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = clamp(out.real_counts[i]);
      out.counts.counts[i] = static_cast<int>(std::floor(v));
      remainder[i] = v - std::floor(v);
      assigned += out.counts.counts[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) {
                       return remainder[a] > remainder[c];
                     });
    int deficit = static_cast<int>(batch_size) - assigned;
    for (std::size_t k = 0; deficit > 0; k = (k + 1) % n) {
      if (out.counts.counts[order[k]] < static_cast<int>(batch_size)) {
        ++out.counts.counts[order[k]];
        --deficit;
      }
    }
  }
  out.sum_mismatch = out.counts.total() - static_cast<int>(batch_size);
  return out;
}

int SingleSampleLabel(std::span<const double> bias_grad) {
  int found = -1;
  int non_positive = 0;
  for (std::size_t i = 0; i < bias_grad.size(); ++i) {
    if (bias_grad[i] <= 0.0) {
      ++non_positive;
      found = static_cast<int>(i);
    }
  }
  if (non_positive != 1) {
    throw Error(ErrorCode::kNotSingleSample,
                std::to_string(non_positive) +
                    " non-positive bias gradient entries (expected exactly 1)");
  }
  return found;
}

LabelCounts CountsFromLogits(std::span<const double> bias_grad,
                             const Matrix& per_sample_logits) {
  const std::size_t n = per_sample_logits.cols();
  if (bias_grad.size() != n) {
    throw Error(ErrorCode::kShape, "bias gradient and logits differ in length");
  }
  const double b = static_cast<double>(per_sample_logits.rows());
  std::vector<double> real(n, 0.0);
  for (std::size_t k = 0; k < per_sample_logits.rows(); ++k) {
    const std::vector<double> p = Softmax(per_sample_logits.row(k));
    for (std::size_t i = 0; i < n; ++i) real[i] += p[i];
  }
  LabelCounts out{std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.counts[i] =
        static_cast<int>(std::nearbyint(real[i] - b * bias_grad[i]));
  }
  return out;
}

std::vector<AttackResult> RunAttack(const GradientSet& aggregate,
                                    const FishingPlan& plan,
                                    std::size_t batch_size, bool repair) {
  std::vector<std::vector<double>> embeddings;
  for (const FishingKit& kit : plan.kits) embeddings.push_back(kit.embedding);
  const Disaggregation split =
      Disaggregate(aggregate.HeadWeight(), aggregate.HeadBias(), embeddings);

  std::vector<AttackResult> results;
  for (std::size_t u = 0; u < plan.kits.size(); ++u) {
    const FishingKit& kit = plan.kits[u];
    const auto row = split.bias_grads.row(u);
    InferredCounts inferred = InferLabels(row, kit.logits, batch_size, repair);
    results.push_back(AttackResult{
        kit.client_id, std::vector<double>(row.begin(), row.end()),
        std::move(inferred.real_counts), std::move(inferred.counts),
        inferred.sum_mismatch, split.residual_norm, split.rcond});
  }
  return results;
}

std::vector<AttackResult> RunAttack(const RoundRecord& record,
                                    const FishingPlan& plan, bool repair) {
  if (record.clients != plan.client_ids()) {
    throw Error(ErrorCode::kContract,
                "round clients do not match the fishing plan");
  }
  return RunAttack(record.aggregate, plan, record.batch_size, repair);
}

}  // namespace labelfish
