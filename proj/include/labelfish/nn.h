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

#ifndef LABELFISH_NN_H_
#define LABELFISH_NN_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "labelfish/tensor.h"

namespace labelfish {

struct FullyConnected {
  std::size_t in = 0;
  std::size_t out = 0;
  bool operator==(const FullyConnected&) const = default;
};

// Valid (unpadded) square convolution.
struct Conv2d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  bool operator==(const Conv2d&) const = default;
};

// Normalizes over every axis except the feature axis (axis 1 of the batch
// tensor), so it covers both dense features and conv channels.
struct BatchNorm {
  std::size_t features = 0;
  double epsilon = 1e-5;
  bool operator==(const BatchNorm&) const = default;
};

struct Relu {
  bool operator==(const Relu&) const = default;
};
struct Flatten {
  bool operator==(const Flatten&) const = default;
};

using LayerSpec =
    std::variant<FullyConnected, Conv2d, BatchNorm, Relu, Flatten>;

std::string LayerName(const LayerSpec& spec);

// Parameters: FullyConnected {weight [out, in], bias [out]};
// Conv2d {weight [out_ch, in_ch, k, k], bias [out_ch]};
// BatchNorm {gamma [d], beta [d]}. Relu and Flatten have none.
// BatchNorm also carries running statistics as buffers {mean, var}; they
// are used only in eval mode and are not model parameters.
struct Layer {
  LayerSpec spec;
  std::vector<Tensor> params;
  std::vector<Tensor> buffers;

  bool operator==(const Layer&) const = default;
};

enum class Mode { kTrain, kEval };

// Ordered layer stack over per-sample inputs of `input_shape`. The last layer
// is always a FullyConnected classifier head (the "FCL"): its input width is
// the embedding dimension and its output width the number of classes.
class Model {
 public:
  Model(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }

  std::size_t num_classes() const;
  std::size_t embedding_dim() const;
  std::size_t head_index() const { return layers_.size() - 1; }
  std::size_t parameter_count() const;

  // Per-sample output shape of layer i.
  const Shape& output_shape(std::size_t i) const { return shapes_.at(i + 1); }

  // Throws if the two models do not share layer kinds and parameter shapes.
  void CheckSameArchitecture(const Model& other) const;

  friend bool operator==(const Model& a, const Model& b);

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;  // shapes_[0] = input, shapes_[i+1] = layer i out
};

struct BatchNormCache {
  Tensor mean;   // [d]
  Tensor var;    // [d], biased
  Tensor x_hat;  // normalized input, same shape as layer input
};

// Every intermediate of one forward pass. activations[0] is the batch input,
// activations[i + 1] the output of layer i.
struct ForwardTrace {
  Mode mode = Mode::kTrain;
  std::vector<Tensor> activations;
  std::vector<BatchNormCache> batch_norm;  // indexed by layer; empty if not BN

  std::size_t batch_size() const { return activations.front().dim(0); }
  // FCL input, B x m.
  Matrix embeddings() const;
  // FCL output, B x n.
  Matrix logits() const;
};

// Per-parameter gradients laid out exactly like Model::layers()[i].params.
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(std::vector<std::vector<Tensor>> per_layer);

  // Zero gradients with the model's parameter shapes.
  static GradientSet ZerosLike(const Model& model);

  const std::vector<std::vector<Tensor>>& layers() const { return layers_; }
  std::vector<std::vector<Tensor>>& mutable_layers() { return layers_; }

  std::size_t size() const;
  std::vector<double> Flatten() const;
  // Inverse of Flatten for a set with this set's shapes.
  void Unflatten(std::span<const double> flat);
  std::vector<Shape> Layout() const;
  static GradientSet FromLayout(const std::vector<Shape>& layout,
                                std::span<const double> flat);

  // FCL weight gradient (n x m) and bias gradient (n).
  Matrix HeadWeight() const;
  std::vector<double> HeadBias() const;

  void CheckSameLayout(const GradientSet& other) const;
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double scale);

  friend bool operator==(const GradientSet&, const GradientSet&) = default;

 private:
  std::vector<std::vector<Tensor>> layers_;
};

// Shape check helper shared by forward-style operations.
void CheckBatchInput(const Model& model, const Tensor& batch_inputs);

ForwardTrace Forward(const Model& model, const Tensor& batch_inputs,
                     Mode mode = Mode::kTrain);

// Train-mode batch normalization with batch statistics (biased variance).
// x is [B, d] or [B, d, ...]; gamma and beta have d entries.
Tensor BatchNormForward(const Tensor& x, std::span<const double> gamma,
                        std::span<const double> beta, double epsilon,
                        BatchNormCache* cache = nullptr);

struct SoftmaxXent {
  double loss = 0.0;     // mean over the batch
  Matrix dloss_dlogits;  // per sample: softmax(y(k)) - onehot(c(k))
};

SoftmaxXent SoftmaxCrossEntropy(const Matrix& logits,
                                std::span<const int> labels);

// Numerically stable softmax of one logit row.
std::vector<double> Softmax(std::span<const double> logits);

// Batch-averaged gradients for every parameter.
GradientSet Backward(const Model& model, const ForwardTrace& trace,
                     std::span<const int> labels);

// Mean cross-entropy of the model on a batch; used by finite-difference
// oracles and diagnostics.
double Loss(const Model& model, const Tensor& batch_inputs,
            std::span<const int> labels, Mode mode = Mode::kTrain);

// --- Builders -------------------------------------------------------------

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases.
void InitializeParameters(Model& model, std::uint64_t seed);

// FC -> ReLU -> FC -> ReLU -> FC.
Model MakeFcn3(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2,
               std::size_t num_classes, std::uint64_t seed);

// Conv2d -> BatchNorm -> ReLU -> Flatten -> FC -> ReLU -> FC.
Model MakeCnnBn(Shape input_shape, std::size_t channels, std::size_t kernel,
                std::size_t hidden, std::size_t num_classes,
                std::uint64_t seed);

}  // namespace labelfish

#endif  // LABELFISH_NN_H_
