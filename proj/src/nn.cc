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

#include "labelfish/nn.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "eigen_util.h"
#include "labelfish/error.h"
#include "labelfish/random.h"

namespace labelfish {

using internal::MapRows;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string LayerLabel(std::size_t index, const LayerSpec& spec) {
  return "layer " + std::to_string(index) + " (" + LayerName(spec) + ")";
}

std::size_t ConvOut(std::size_t extent, std::size_t kernel,
                    std::size_t stride) {
  return (extent - kernel) / stride + 1;
}

// Output per-sample shape of a layer, validating its input shape.
Shape InferShape(std::size_t index, const LayerSpec& spec, const Shape& in) {
  auto fail = [&](const std::string& why) {
    return Error(ErrorCode::kShape, LayerLabel(index, spec) + ": " + why +
                                        ", input shape " + ShapeToString(in));
  };
  return std::visit(
      Overloaded{
          [&](const FullyConnected& fc) -> Shape {
            if (fc.in == 0 || fc.out == 0) throw fail("zero width");
            if (in.size() != 1 || in[0] != fc.in) {
              throw fail("expects [" + std::to_string(fc.in) + "]");
            }
            return Shape{fc.out};
          },
          [&](const Conv2d& conv) -> Shape {
            if (conv.kernel == 0 || conv.stride == 0 ||
                conv.out_channels == 0) {
              throw fail("degenerate convolution");
            }
            if (in.size() != 3 || in[0] != conv.in_channels ||
                in[1] < conv.kernel || in[2] < conv.kernel) {
              throw fail("expects [" + std::to_string(conv.in_channels) +
                         ", H>=k, W>=k]");
            }
            return Shape{conv.out_channels,
                         ConvOut(in[1], conv.kernel, conv.stride),
                         ConvOut(in[2], conv.kernel, conv.stride)};
          },
          [&](const BatchNorm& bn) -> Shape {
            if (!(bn.epsilon > 0.0)) throw fail("epsilon must be positive");
            if (in.empty() || in[0] != bn.features) {
              throw fail("expects " + std::to_string(bn.features) +
                         " features on axis 0");
            }
            return in;
          },
          [&](const Relu&) -> Shape { return in; },
          [&](const Flatten&) -> Shape { return Shape{ShapeSize(in)}; },
      },
      spec);
}

std::vector<Shape> ParamShapes(const LayerSpec& spec) {
  return std::visit(
      Overloaded{
          [](const FullyConnected& fc) {
            return std::vector<Shape>{{fc.out, fc.in}, {fc.out}};
          },
          [](const Conv2d& c) {
            return std::vector<Shape>{
                {c.out_channels, c.in_channels, c.kernel, c.kernel},
                {c.out_channels}};
          },
          [](const BatchNorm& bn) {
            return std::vector<Shape>{{bn.features}, {bn.features}};
          },
          [](const Relu&) { return std::vector<Shape>{}; },
          [](const Flatten&) { return std::vector<Shape>{}; },
      },
      spec);
}

Shape WithBatch(std::size_t batch, const Shape& per_sample) {
  Shape s;
  s.reserve(per_sample.size() + 1);
  s.push_back(batch);
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

// im2col for a valid convolution: rows are (sample, oy, ox), columns are
// (channel, ky, kx).
Matrix Im2Col(const Tensor& x, const Conv2d& conv) {
  const std::size_t batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t k = conv.kernel, s = conv.stride;
  const std::size_t oh = ConvOut(h, k, s), ow = ConvOut(w, k, s);
  Matrix cols(batch * oh * ow, ch * k * k);
  auto in = x.data();
  auto out = cols.data();
  std::size_t r = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++r) {
        double* dst = out.data() + r * cols.cols();
        for (std::size_t c = 0; c < ch; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const double* src =
                in.data() + ((b * ch + c) * h + oy * s + ky) * w + ox * s;
            for (std::size_t kx = 0; kx < k; ++kx) *dst++ = src[kx];
          }
        }
      }
    }
  }
  return cols;
}

void Col2ImAdd(const Matrix& cols, const Conv2d& conv, Tensor& dx) {
  const std::size_t batch = dx.dim(0), ch = dx.dim(1), h = dx.dim(2),
                    w = dx.dim(3);
  const std::size_t k = conv.kernel, s = conv.stride;
  const std::size_t oh = ConvOut(h, k, s), ow = ConvOut(w, k, s);
  auto out = dx.data();
  auto in = cols.data();
  std::size_t r = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++r) {
        const double* src = in.data() + r * cols.cols();
        for (std::size_t c = 0; c < ch; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            double* dst =
                out.data() + ((b * ch + c) * h + oy * s + ky) * w + ox * s;
            for (std::size_t kx = 0; kx < k; ++kx) dst[kx] += *src++;
          }
        }
      }
    }
  }
}

Tensor FullyConnectedForward(const Tensor& x, const Layer& layer) {
  const auto& fc = std::get<FullyConnected>(layer.spec);
  const std::size_t batch = x.dim(0);
  Tensor out(Shape{batch, fc.out});
  auto y = MapRows(out.data(), batch, fc.out);
  y.noalias() = MapRows(x.data(), batch, fc.in) *
                MapRows(layer.params[0].data(), fc.out, fc.in).transpose();
  y.rowwise() += MapRows(layer.params[1].data(), 1, fc.out).row(0);
  return out;
}

Tensor ConvForward(const Tensor& x, const Layer& layer) {
  const auto& conv = std::get<Conv2d>(layer.spec);
  const std::size_t batch = x.dim(0);
  const std::size_t oh = ConvOut(x.dim(2), conv.kernel, conv.stride);
  const std::size_t ow = ConvOut(x.dim(3), conv.kernel, conv.stride);
  const std::size_t plane = oh * ow;
  const std::size_t patch = conv.in_channels * conv.kernel * conv.kernel;

  Matrix cols = Im2Col(x, conv);
  internal::RowMatrix prod =
      MapRows(cols.data(), cols.rows(), patch) *
      MapRows(layer.params[0].data(), conv.out_channels, patch).transpose();

  Tensor out(Shape{batch, conv.out_channels, oh, ow});
  auto dst = out.data();
  auto bias = layer.params[1].data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < conv.out_channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        dst[(b * conv.out_channels + c) * plane + p] =
            prod(static_cast<Eigen::Index>(b * plane + p),
                 static_cast<Eigen::Index>(c)) +
            bias[c];
      }
    }
  }
  return out;
}

// Axis-1 feature layout of a batch tensor: [B, d, inner...].
struct FeatureLayout {
  std::size_t batch, features, inner;
};

FeatureLayout LayoutOf(const Tensor& x) {
  return {x.dim(0), x.dim(1), x.size() / (x.dim(0) * x.dim(1))};
}

Tensor BatchNormEval(const Tensor& x, const Layer& layer) {
  const auto& bn = std::get<BatchNorm>(layer.spec);
  auto [batch, d, inner] = LayoutOf(x);
  auto gamma = layer.params[0].data();
  auto beta = layer.params[1].data();
  auto mean = layer.buffers[0].data();
  auto var = layer.buffers[1].data();
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < d; ++f) {
      const double inv_std = 1.0 / std::sqrt(var[f] + bn.epsilon);
      for (std::size_t p = 0; p < inner; ++p) {
        const std::size_t i = (b * d + f) * inner + p;
        dst[i] = gamma[f] * ((src[i] - mean[f]) * inv_std) + beta[f];
      }
    }
  }
  return out;
}

void CheckTraceMatches(const Model& model, const ForwardTrace& trace) {
  const auto& layers = model.layers();
  if (trace.activations.size() != layers.size() + 1 ||
      trace.batch_norm.size() != layers.size()) {
    throw Error(ErrorCode::kContract,
                "trace does not belong to this model (layer count differs)");
  }
  const std::size_t batch = trace.batch_size();
  for (std::size_t i = 0; i <= layers.size(); ++i) {
    const Shape& per_sample =
        i == 0 ? model.input_shape() : model.output_shape(i - 1);
    if (trace.activations[i].shape() != WithBatch(batch, per_sample)) {
      throw Error(ErrorCode::kContract,
                  "trace activation " + std::to_string(i) + " has shape " +
                      ShapeToString(trace.activations[i].shape()));
    }
  }
  if (trace.mode != Mode::kTrain) {
    throw Error(ErrorCode::kContract, "backward needs a train-mode trace");
  }
}

}  // namespace

std::string LayerName(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const FullyConnected& fc) {
                          return "fully_connected(" + std::to_string(fc.in) +
                                 "," + std::to_string(fc.out) + ")";
                        },
                        [](const Conv2d& c) {
                          return "conv2d(" + std::to_string(c.in_channels) +
                                 "," + std::to_string(c.out_channels) + "," +
                                 std::to_string(c.kernel) + "," +
                                 std::to_string(c.stride) + ")";
                        },
                        [](const BatchNorm& bn) {
                          return "batch_norm(" + std::to_string(bn.features) +
                                 ")";
                        },
                        [](const Relu&) { return std::string("relu"); },
                        [](const Flatten&) { return std::string("flatten"); },
                    },
                    spec);
}

// --- Model -----------------------------------------------------------------

Model::Model(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (layers_.empty()) {
    throw Error(ErrorCode::kArchitecture, "model has no layers");
  }
  if (!std::holds_alternative<FullyConnected>(layers_.back().spec)) {
    throw Error(ErrorCode::kArchitecture,
                "last layer must be fully connected, got " +
                    LayerName(layers_.back().spec));
  }
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& layer = layers_[i];
    shapes_.push_back(InferShape(i, layer.spec, shapes_.back()));

    const std::vector<Shape> expected = ParamShapes(layer.spec);
    if (layer.params.empty()) {
      for (const Shape& s : expected) layer.params.emplace_back(s);
      if (std::holds_alternative<BatchNorm>(layer.spec)) {
        layer.params[0] = Tensor::Full(expected[0], 1.0);
      }
    }
    if (layer.params.size() != expected.size()) {
      throw Error(ErrorCode::kShape,
                  LayerLabel(i, layer.spec) + ": wrong number of parameters");
    }
    for (std::size_t p = 0; p < expected.size(); ++p) {
      if (layer.params[p].shape() != expected[p]) {
        throw Error(ErrorCode::kShape,
                    LayerLabel(i, layer.spec) + ": parameter " +
                        std::to_string(p) + " has shape " +
                        ShapeToString(layer.params[p].shape()) + ", expected " +
                        ShapeToString(expected[p]));
      }
    }
    if (const auto* bn = std::get_if<BatchNorm>(&layer.spec)) {
      if (layer.buffers.empty()) {
        layer.buffers.emplace_back(Shape{bn->features});
        layer.buffers.push_back(Tensor::Full(Shape{bn->features}, 1.0));
      }
      if (layer.buffers.size() != 2 ||
          layer.buffers[0].shape() != Shape{bn->features} ||
          layer.buffers[1].shape() != Shape{bn->features}) {
        throw Error(ErrorCode::kShape, LayerLabel(i, layer.spec) +
                                           ": malformed running statistics");
      }
    } else if (!layer.buffers.empty()) {
      throw Error(ErrorCode::kShape,
                  LayerLabel(i, layer.spec) + ": unexpected buffers");
    }
  }
}

std::size_t Model::num_classes() const {
  return std::get<FullyConnected>(layers_.back().spec).out;
}

std::size_t Model::embedding_dim() const {
  return std::get<FullyConnected>(layers_.back().spec).in;
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const Layer& layer : layers_) {
    for (const Tensor& p : layer.params) total += p.size();
  }
  return total;
}

void Model::CheckSameArchitecture(const Model& other) const {
  if (input_shape_ != other.input_shape_ ||
      layers_.size() != other.layers_.size()) {
    throw Error(ErrorCode::kArchitecture, "models differ in input or depth");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!(layers_[i].spec == other.layers_[i].spec)) {
      throw Error(ErrorCode::kArchitecture,
                  "models differ at " + LayerLabel(i, layers_[i].spec));
    }
  }
}

bool operator==(const Model& a, const Model& b) {
  return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_;
}

// --- Trace / gradients -------------------------------------------------------

Matrix ForwardTrace::embeddings() const {
  const Tensor& e = activations[activations.size() - 2];
  return Matrix(e.Reshaped(Shape{e.dim(0), e.size() / e.dim(0)}));
}

Matrix ForwardTrace::logits() const { return Matrix(activations.back()); }

GradientSet::GradientSet(std::vector<std::vector<Tensor>> per_layer)
    : layers_(std::move(per_layer)) {}

GradientSet GradientSet::ZerosLike(const Model& model) {
  std::vector<std::vector<Tensor>> per_layer;
  for (const Layer& layer : model.layers()) {
    std::vector<Tensor> grads;
    for (const Tensor& p : layer.params) grads.emplace_back(p.shape());
    per_layer.push_back(std::move(grads));
  }
  return GradientSet(std::move(per_layer));
}

std::size_t GradientSet::size() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) {
    for (const Tensor& t : layer) total += t.size();
  }
  return total;
}

std::vector<double> GradientSet::Flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (const auto& layer : layers_) {
    for (const Tensor& t : layer) {
      flat.insert(flat.end(), t.values().begin(), t.values().end());
    }
  }
  return flat;
}

void GradientSet::Unflatten(std::span<const double> flat) {
  if (flat.size() != size()) {
    throw Error(ErrorCode::kShape,
                "flat gradient has " + std::to_string(flat.size()) +
                    " elements, expected " + std::to_string(size()));
  }
  std::size_t offset = 0;
  for (auto& layer : layers_) {
    for (Tensor& t : layer) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t.size(),
                  t.data().begin());
      offset += t.size();
    }
  }
}

std::vector<Shape> GradientSet::Layout() const {
  std::vector<Shape> layout;
  for (const auto& layer : layers_) {
    for (const Tensor& t : layer) layout.push_back(t.shape());
    // Layer boundary marker: an empty shape.
    layout.emplace_back();
  }
  return layout;
}

GradientSet GradientSet::FromLayout(const std::vector<Shape>& layout,
                                    std::span<const double> flat) {
  std::vector<std::vector<Tensor>> per_layer(1);
  for (const Shape& s : layout) {
    if (s.empty()) {
      per_layer.emplace_back();
    } else {
      per_layer.back().emplace_back(s);
    }
  }
  per_layer.pop_back();
  GradientSet set(std::move(per_layer));
  set.Unflatten(flat);
  return set;
}

Matrix GradientSet::HeadWeight() const {
  if (layers_.empty() || layers_.back().size() != 2) {
    throw Error(ErrorCode::kContract, "gradient set has no classifier head");
  }
  return Matrix(layers_.back()[0]);
}

std::vector<double> GradientSet::HeadBias() const {
  if (layers_.empty() || layers_.back().size() != 2) {
    throw Error(ErrorCode::kContract, "gradient set has no classifier head");
  }
  return layers_.back()[1].values();
}

void GradientSet::CheckSameLayout(const GradientSet& other) const {
  if (layers_.size() != other.layers_.size()) {
    throw Error(ErrorCode::kShape, "gradient sets differ in layer count");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].size() != other.layers_[i].size()) {
      throw Error(ErrorCode::kShape,
                  "gradient sets differ at layer " + std::to_string(i));
    }
    for (std::size_t p = 0; p < layers_[i].size(); ++p) {
      if (layers_[i][p].shape() != other.layers_[i][p].shape()) {
        throw Error(
            ErrorCode::kShape,
            "gradient sets differ in shape at layer " + std::to_string(i));
      }
    }
  }
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  CheckSameLayout(other);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (std::size_t p = 0; p < layers_[i].size(); ++p) {
      auto dst = layers_[i][p].data();
      auto src = other.layers_[i][p].data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double scale) {
  for (auto& layer : layers_) {
    for (Tensor& t : layer) {
      for (double& v : t.data()) v *= scale;
    }
  }
  return *this;
}

// --- Forward -----------------------------------------------------------------

void CheckBatchInput(const Model& model, const Tensor& batch_inputs) {
  if (batch_inputs.rank() < 1 ||
      batch_inputs.shape() !=
          WithBatch(batch_inputs.dim(0), model.input_shape())) {
    throw Error(ErrorCode::kShape, "layer 0 (" +
                                       LayerName(model.layer(0).spec) +
                                       "): batch input shape " +
                                       ShapeToString(batch_inputs.shape()) +
                                       " does not match per-sample shape " +
                                       ShapeToString(model.input_shape()));
  }
}

Tensor BatchNormForward(const Tensor& x, std::span<const double> gamma,
                        std::span<const double> beta, double epsilon,
                        BatchNormCache* cache) {
  if (x.rank() < 2 || x.empty()) {
    throw Error(ErrorCode::kDomain, "batch norm needs a non-empty batch");
  }
  auto [batch, d, inner] = LayoutOf(x);
  if (gamma.size() != d || beta.size() != d) {
    throw Error(ErrorCode::kShape,
                "batch norm gamma/beta need " + std::to_string(d) + " entries");
  }
  if (epsilon < 0.0) {
    throw Error(ErrorCode::kDomain, "batch norm epsilon must be >= 0");
  }
  const double count = static_cast<double>(batch * inner);
  Tensor mean(Shape{d});
  Tensor var(Shape{d});
  auto src = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < d; ++f) {
      for (std::size_t p = 0; p < inner; ++p) {
        mean[f] += src[(b * d + f) * inner + p];
      }
    }
  }
  for (std::size_t f = 0; f < d; ++f) mean[f] /= count;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < d; ++f) {
      for (std::size_t p = 0; p < inner; ++p) {
        const double c = src[(b * d + f) * inner + p] - mean[f];
        var[f] += c * c;
      }
    }
  }
  for (std::size_t f = 0; f < d; ++f) var[f] /= count;

  Tensor x_hat(x.shape());
  Tensor out(x.shape());
  auto xh = x_hat.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < d; ++f) {
      const double denom = std::sqrt(var[f] + epsilon);
      for (std::size_t p = 0; p < inner; ++p) {
        const std::size_t i = (b * d + f) * inner + p;
        const double centered = src[i] - mean[f];
        // A zero-variance feature normalizes to zero even when epsilon is 0.
        xh[i] = centered == 0.0 ? 0.0 : centered / denom;
        dst[i] = gamma[f] * xh[i] + beta[f];
      }
    }
  }
  if (cache != nullptr) {
    cache->mean = std::move(mean);
    cache->var = std::move(var);
    cache->x_hat = std::move(x_hat);
  }
  return out;
}

ForwardTrace Forward(const Model& model, const Tensor& batch_inputs,
                     Mode mode) {
  CheckBatchInput(model, batch_inputs);
  ForwardTrace trace;
  trace.mode = mode;
  trace.activations.reserve(model.layers().size() + 1);
  trace.batch_norm.resize(model.layers().size());
  trace.activations.push_back(batch_inputs);
  const std::size_t batch = batch_inputs.dim(0);

  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    const Layer& layer = model.layer(i);
    const Tensor& x = trace.activations.back();
    Tensor y = std::visit(
        Overloaded{
            [&](const FullyConnected&) {
              return FullyConnectedForward(x, layer);
            },
            [&](const Conv2d&) { return ConvForward(x, layer); },
            [&](const BatchNorm& bn) {
              if (mode == Mode::kEval) return BatchNormEval(x, layer);
              return BatchNormForward(x, layer.params[0].data(),
                                      layer.params[1].data(), bn.epsilon,
                                      &trace.batch_norm[i]);
            },
            [&](const Relu&) {
              Tensor out = x;
              for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
              return out;
            },
            [&](const Flatten&) {
              return x.Reshaped(WithBatch(batch, model.output_shape(i)));
            },
        },
        layer.spec);
    if (!y.AllFinite()) {
      throw Error(ErrorCode::kDomain,
                  LayerLabel(i, layer.spec) + " produced a non-finite value");
    }
    trace.activations.push_back(std::move(y));
  }
  return trace;
}

// --- Loss --------------------------------------------------------------------

std::vector<double> Softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

SoftmaxXent SoftmaxCrossEntropy(const Matrix& logits,
                                std::span<const int> labels) {
  const std::size_t batch = logits.rows(), n = logits.cols();
  if (labels.size() != batch) {
    throw Error(ErrorCode::kShape,
                "label count " + std::to_string(labels.size()) +
                    " != batch size " + std::to_string(batch));
  }
  SoftmaxXent out;
  out.dloss_dlogits = Matrix(batch, n);
  double total = 0.0;
  for (std::size_t k = 0; k < batch; ++k) {
    const int c = labels[k];
    if (c < 0 || static_cast<std::size_t>(c) >= n) {
      throw Error(ErrorCode::kDomain, "label " + std::to_string(c) +
                                          " outside [0, " + std::to_string(n) +
                                          ")");
    }
    auto row = logits.row(k);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - peak);
    const double log_sum = peak + std::log(sum);
    total += log_sum - row[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < n; ++i) {
      out.dloss_dlogits(k, i) = std::exp(row[i] - log_sum);
    }
    out.dloss_dlogits(k, static_cast<std::size_t>(c)) -= 1.0;
  }
  out.loss = total / static_cast<double>(batch);
  return out;
}

double Loss(const Model& model, const Tensor& batch_inputs,
            std::span<const int> labels, Mode mode) {
  ForwardTrace trace = Forward(model, batch_inputs, mode);
  return SoftmaxCrossEntropy(trace.logits(), labels).loss;
}

// --- Backward ----------------------------------------------------------------

GradientSet Backward(const Model& model, const ForwardTrace& trace,
                     std::span<const int> labels) {
  CheckTraceMatches(model, trace);
  const std::size_t batch = trace.batch_size();
  SoftmaxXent xent = SoftmaxCrossEntropy(trace.logits(), labels);

  GradientSet grads = GradientSet::ZerosLike(model);
  auto& out = grads.mutable_layers();

  Tensor delta = std::move(xent.dloss_dlogits).tensor();
  for (double& v : delta.data()) v /= static_cast<double>(batch);

  for (std::size_t idx = model.layers().size(); idx-- > 0;) {
    const Layer& layer = model.layer(idx);
    const Tensor& x = trace.activations[idx];
    const bool need_input_grad = idx > 0;
    Tensor dx;

    std::visit(
        Overloaded{
            [&](const FullyConnected& fc) {
              auto d = MapRows(delta.data(), batch, fc.out);
              auto xin = MapRows(x.data(), batch, fc.in);
              MapRows(out[idx][0].data(), fc.out, fc.in).noalias() =
                  d.transpose() * xin;
              MapRows(out[idx][1].data(), 1, fc.out) = d.colwise().sum();
              if (need_input_grad) {
                dx = Tensor(x.shape());
                MapRows(dx.data(), batch, fc.in).noalias() =
                    d * MapRows(layer.params[0].data(), fc.out, fc.in);
              }
            },
            [&](const Conv2d& conv) {
              const std::size_t oh = delta.dim(2), ow = delta.dim(3);
              const std::size_t plane = oh * ow;
              const std::size_t patch =
                  conv.in_channels * conv.kernel * conv.kernel;
              // Delta rearranged to rows (sample, position), cols channel.
              Matrix d_rows(batch * plane, conv.out_channels);
              auto src = delta.data();
              for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t c = 0; c < conv.out_channels; ++c) {
                  for (std::size_t p = 0; p < plane; ++p) {
                    d_rows(b * plane + p, c) =
                        src[(b * conv.out_channels + c) * plane + p];
                  }
                }
              }
              Matrix cols = Im2Col(x, conv);
              auto d = MapRows(d_rows.data(), d_rows.rows(), conv.out_channels);
              MapRows(out[idx][0].data(), conv.out_channels, patch).noalias() =
                  d.transpose() * MapRows(cols.data(), cols.rows(), patch);
              MapRows(out[idx][1].data(), 1, conv.out_channels) =
                  d.colwise().sum();
              if (need_input_grad) {
                Matrix dcols(cols.rows(), patch);
                MapRows(dcols.data(), dcols.rows(), patch).noalias() =
                    d *
                    MapRows(layer.params[0].data(), conv.out_channels, patch);
                dx = Tensor(x.shape());
                Col2ImAdd(dcols, conv, dx);
              }
            },
            [&](const BatchNorm&) {
              const BatchNormCache& cache = trace.batch_norm[idx];
              auto [nb, d, inner] = LayoutOf(x);
              const double count = static_cast<double>(nb * inner);
              auto gamma = layer.params[0].data();
              auto dy = delta.data();
              auto xh = cache.x_hat.data();
              auto dgamma = out[idx][0].data();
              auto dbeta = out[idx][1].data();
              for (std::size_t b = 0; b < nb; ++b) {
                for (std::size_t f = 0; f < d; ++f) {
                  for (std::size_t p = 0; p < inner; ++p) {
                    const std::size_t i = (b * d + f) * inner + p;
                    dgamma[f] += dy[i] * xh[i];
                    dbeta[f] += dy[i];
                  }
                }
              }
              if (!need_input_grad) return;
              const double eps = std::get<BatchNorm>(layer.spec).epsilon;
              dx = Tensor(x.shape());
              auto dst = dx.data();
              for (std::size_t f = 0; f < d; ++f) {
                // With gamma == 0 every term below is an exact zero.
                const double inv_std = 1.0 / std::sqrt(cache.var[f] + eps);
                const double sum_dxh = gamma[f] * dbeta[f];
                const double sum_dxh_xh = gamma[f] * dgamma[f];
                for (std::size_t b = 0; b < nb; ++b) {
                  for (std::size_t p = 0; p < inner; ++p) {
                    const std::size_t i = (b * d + f) * inner + p;
                    const double dxh = dy[i] * gamma[f];
                    dst[i] = inv_std / count *
                             (count * dxh - sum_dxh - xh[i] * sum_dxh_xh);
                  }
                }
              }
            },
            [&](const Relu&) {
              if (!need_input_grad) return;
              dx = delta;
              auto in = x.data();
              auto dst = dx.data();
              for (std::size_t i = 0; i < dst.size(); ++i) {
                if (!(in[i] > 0.0)) dst[i] = 0.0;
              }
            },
            [&](const Flatten&) {
              if (need_input_grad) dx = delta.Reshaped(x.shape());
            },
        },
        layer.spec);

    if (!need_input_grad) break;
    delta = std::move(dx);
  }
  return grads;
}

// --- Builders ----------------------------------------------------------------

void InitializeParameters(Model& model, std::uint64_t seed) {
  auto& layers = model.mutable_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Layer& layer = layers[i];
    std::size_t fan_in = 0;
    if (const auto* fc = std::get_if<FullyConnected>(&layer.spec)) {
      fan_in = fc->in;
    } else if (const auto* conv = std::get_if<Conv2d>(&layer.spec)) {
      fan_in = conv->in_channels * conv->kernel * conv->kernel;
    } else if (std::holds_alternative<BatchNorm>(layer.spec)) {
      std::fill(layer.params[0].data().begin(), layer.params[0].data().end(),
                1.0);
      std::fill(layer.params[1].data().begin(), layer.params[1].data().end(),
                0.0);
      continue;
    } else {
      continue;
    }
    Rng rng = MakeRng(seed, {Tag(Stream::kModelInit), i});
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Tensor& p : layer.params) {
      for (double& v : p.data()) v = dist(rng);
    }
  }
}

Model MakeFcn3(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2,
               std::size_t num_classes, std::uint64_t seed) {
  std::vector<Layer> layers;
  layers.push_back({FullyConnected{input_dim, hidden1}, {}, {}});
  layers.push_back({Relu{}, {}, {}});
  layers.push_back({FullyConnected{hidden1, hidden2}, {}, {}});
  layers.push_back({Relu{}, {}, {}});
  layers.push_back({FullyConnected{hidden2, num_classes}, {}, {}});
  Model model(Shape{input_dim}, std::move(layers));
  InitializeParameters(model, seed);
  return model;
}

Model MakeCnnBn(Shape input_shape, std::size_t channels, std::size_t kernel,
                std::size_t hidden, std::size_t num_classes,
                std::uint64_t seed) {
  if (input_shape.size() != 3) {
    throw Error(ErrorCode::kShape, "cnn_bn input must be [C, H, W], got " +
                                       ShapeToString(input_shape));
  }
  if (input_shape[1] < kernel || input_shape[2] < kernel) {
    throw Error(ErrorCode::kShape, "cnn_bn kernel larger than input");
  }
  const std::size_t oh = input_shape[1] - kernel + 1;
  const std::size_t ow = input_shape[2] - kernel + 1;
  std::vector<Layer> layers;
  layers.push_back({Conv2d{input_shape[0], channels, kernel, 1}, {}, {}});
  layers.push_back({BatchNorm{channels, 1e-5}, {}, {}});
  layers.push_back({Relu{}, {}, {}});
  layers.push_back({Flatten{}, {}, {}});
  layers.push_back({FullyConnected{channels * oh * ow, hidden}, {}, {}});
  layers.push_back({Relu{}, {}, {}});
  layers.push_back({FullyConnected{hidden, num_classes}, {}, {}});
  Model model(std::move(input_shape), std::move(layers));
  InitializeParameters(model, seed);
  return model;
}

}  // namespace labelfish
