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

#include <fstream>
#include <iterator>
#include <string>

#include "bytes.h"
#include "json.hpp"
#include "labelfish/error.h"

namespace labelfish {

namespace {

using internal::ByteReader;
using internal::ByteWriter;

constexpr std::string_view kModelMagic = "LFMD";
constexpr std::string_view kRecordMagic = "LFRR";
constexpr std::uint32_t kVersion = 1;

enum LayerKind : std::uint8_t {
  kFullyConnected = 0,
  kConv2d = 1,
  kBatchNorm = 2,
  kRelu = 3,
  kFlatten = 4,
};

void WriteShape(ByteWriter& out, const Shape& shape) {
  out.U64(shape.size());
  for (std::size_t d : shape) out.U64(d);
}

Shape ReadShape(ByteReader& in) {
  Shape shape(in.Count(8));
  for (std::size_t& d : shape) d = in.U64();
  return shape;
}

void WriteTensor(ByteWriter& out, const Tensor& t) {
  WriteShape(out, t.shape());
  for (double v : t.values()) out.F64(v);
}

Tensor ReadTensor(ByteReader& in) {
  Shape shape = ReadShape(in);
  std::size_t count = 1;
  for (std::size_t d : shape) {
    if (d == 0 || count > SIZE_MAX / d) in.Fail("bad tensor shape");
    count *= d;
  }
  if (shape.empty()) in.Fail("rank-0 tensor");
  std::vector<double> values(count);
  for (double& v : values) v = in.F64();
  try {
    return Tensor(std::move(shape), std::move(values));
  } catch (const Error& e) {
    in.Fail(e.what());
  }
}

void WriteTensors(ByteWriter& out, const std::vector<Tensor>& ts) {
  out.U64(ts.size());
  for (const Tensor& t : ts) WriteTensor(out, t);
}

std::vector<Tensor> ReadTensors(ByteReader& in) {
  std::vector<Tensor> ts(in.Count(8));
  for (Tensor& t : ts) t = ReadTensor(in);
  return ts;
}

void WriteModel(ByteWriter& out, const Model& model) {
  out.Bytes(kModelMagic);
  out.U32(kVersion);
  WriteShape(out, model.input_shape());
  out.U64(model.layers().size());
  for (const Layer& layer : model.layers()) {
    std::visit(
        [&out](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, FullyConnected>) {
            out.U8(kFullyConnected);
            out.U64(s.in);
            out.U64(s.out);
          } else if constexpr (std::is_same_v<T, Conv2d>) {
            out.U8(kConv2d);
            out.U64(s.in_channels);
            out.U64(s.out_channels);
            out.U64(s.kernel);
            out.U64(s.stride);
          } else if constexpr (std::is_same_v<T, BatchNorm>) {
            out.U8(kBatchNorm);
            out.U64(s.features);
            out.F64(s.epsilon);
          } else if constexpr (std::is_same_v<T, Relu>) {
            out.U8(kRelu);
          } else {
            out.U8(kFlatten);
          }
        },
        layer.spec);
    WriteTensors(out, layer.params);
    WriteTensors(out, layer.buffers);
  }
}

void ExpectMagic(ByteReader& in, std::string_view magic) {
  if (in.Bytes(magic.size()) != magic) in.Fail("bad magic");
  const std::uint32_t version = in.U32();
  if (version != kVersion)
    in.Fail("unsupported version " + std::to_string(version));
}

Model ReadModel(ByteReader& in) {
  ExpectMagic(in, kModelMagic);
  Shape input_shape = ReadShape(in);
  std::vector<Layer> layers(in.Count(1));
  for (Layer& layer : layers) {
    const std::uint8_t kind = in.U8();
    switch (kind) {
      case kFullyConnected: {
        FullyConnected fc;
        fc.in = in.U64();
        fc.out = in.U64();
        layer.spec = fc;
        break;
      }
      case kConv2d: {
        Conv2d conv;
        conv.in_channels = in.U64();
        conv.out_channels = in.U64();
        conv.kernel = in.U64();
        conv.stride = in.U64();
        layer.spec = conv;
        break;
      }
      case kBatchNorm: {
        BatchNorm bn;
        bn.features = in.U64();
        bn.epsilon = in.F64();
        layer.spec = bn;
        break;
      }
      case kRelu:
        layer.spec = Relu{};
        break;
      case kFlatten:
        layer.spec = Flatten{};
        break;
      default:
        in.Fail("unknown layer kind " + std::to_string(kind));
    }
    layer.params = ReadTensors(in);
    layer.buffers = ReadTensors(in);
  }
  try {
    return Model(std::move(input_shape), std::move(layers));
  } catch (const Error& e) {
    in.Fail(std::string("invalid model: ") + e.what());
  }
}

void WriteGradients(ByteWriter& out, const GradientSet& g) {
  out.U64(g.layers().size());
  for (const auto& layer : g.layers()) WriteTensors(out, layer);
}

GradientSet ReadGradients(ByteReader& in) {
  std::vector<std::vector<Tensor>> layers(in.Count(8));
  for (auto& layer : layers) layer = ReadTensors(in);
  return GradientSet(std::move(layers));
}

}  // namespace

std::vector<std::uint8_t> SerializeModel(const Model& model) {
  ByteWriter out;
  WriteModel(out, model);
  return out.Take();
}

Model ParseModel(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, "model");
  Model model = ReadModel(in);
  in.ExpectDone();
  return model;
}

std::vector<std::uint8_t> SerializeRoundRecord(const RoundRecord& record) {
  ByteWriter out;
  out.Bytes(kRecordMagic);
  out.U32(kVersion);
  out.U64(record.round);
  out.U64(record.batch_size);
  out.U8(static_cast<std::uint8_t>(record.sa_mode));
  out.U8(static_cast<std::uint8_t>(record.scale_bits));
  out.U64(record.clients.size());
  for (ClientId id : record.clients) out.U32(id);
  out.U64(record.true_counts.size());
  for (const LabelCounts& c : record.true_counts) {
    out.U64(c.counts.size());
    for (int v : c.counts) out.U32(static_cast<std::uint32_t>(v));
  }
  out.U64(record.client_gradients.size());
  for (const GradientSet& g : record.client_gradients) WriteGradients(out, g);
  WriteGradients(out, record.aggregate);
  out.U64(record.models.size());
  for (const Model& m : record.models) WriteModel(out, m);
  return out.Take();
}

RoundRecord ParseRoundRecord(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, "round record");
  ExpectMagic(in, kRecordMagic);
  RoundRecord record;
  record.round = in.U64();
  record.batch_size = in.U64();
  const std::uint8_t mode = in.U8();
  if (mode > 1) in.Fail("unknown secure-aggregation mode");
  record.sa_mode = static_cast<SaMode>(mode);
  record.scale_bits = in.U8();
  record.clients.resize(in.Count(4));
  for (ClientId& id : record.clients) id = in.U32();
  record.true_counts.resize(in.Count(8));
  for (LabelCounts& c : record.true_counts) {
    c.counts.resize(in.Count(4));
    for (int& v : c.counts) v = static_cast<int>(in.U32());
  }
  record.client_gradients.resize(in.Count(8));
  for (GradientSet& g : record.client_gradients) g = ReadGradients(in);
  record.aggregate = ReadGradients(in);
  const std::size_t models = in.Count(1);
  for (std::size_t i = 0; i < models; ++i)
    record.models.push_back(ReadModel(in));
  in.ExpectDone();
  return record;
}

std::string AttackResultsToJson(std::span<const AttackResult> results) {
  nlohmann::json out = nlohmann::json::array();
  for (const AttackResult& r : results) {
    out.push_back({{"client_id", r.client_id},
                   {"counts", r.counts.counts},
                   {"real_counts", r.real_counts},
                   {"bias_grad", r.bias_grad},
                   {"sum_mismatch", r.sum_mismatch},
                   {"residual_norm", r.residual_norm},
                   {"rcond", r.rcond}});
  }
  return out.dump(2);
}

std::vector<AttackResult> AttackResultsFromJson(std::string_view json) {
  std::vector<AttackResult> results;
  try {
    const nlohmann::json in = nlohmann::json::parse(json);
    for (const auto& item : in) {
      AttackResult r;
      r.client_id = item.at("client_id").get<ClientId>();
      r.counts.counts = item.at("counts").get<std::vector<int>>();
      r.real_counts = item.at("real_counts").get<std::vector<double>>();
      r.bias_grad = item.at("bias_grad").get<std::vector<double>>();
      r.sum_mismatch = item.at("sum_mismatch").get<int>();
      r.residual_norm = item.at("residual_norm").get<double>();
      r.rcond = item.at("rcond").get<double>();
      results.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("attack results: ") + e.what());
  }
  return results;
}

void WriteFile(const std::filesystem::path& path,
               std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

void WriteFile(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void SaveModel(const Model& model, const std::filesystem::path& path) {
  WriteFile(path, SerializeModel(model));
}

Model LoadModel(const std::filesystem::path& path) {
  return ParseModel(ReadFileBytes(path));
}

void SaveRoundRecord(const RoundRecord& record,
                     const std::filesystem::path& path) {
  WriteFile(path, SerializeRoundRecord(record));
}

RoundRecord LoadRoundRecord(const std::filesystem::path& path) {
  return ParseRoundRecord(ReadFileBytes(path));
}

}  // namespace labelfish
