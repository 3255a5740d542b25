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

#include "labelfish/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "labelfish/error.h"
#include "labelfish/random.h"

namespace labelfish {

namespace {

std::uint32_t ReadBigEndian32(std::span<const std::uint8_t> bytes,
                              std::size_t offset, const char* file) {
  if (offset + 4 > bytes.size()) {
    throw Error(ErrorCode::kFormat, std::string(file) +
                                        ": truncated header at offset " +
                                        std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) |
         std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string Hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

}  // namespace

Shape Dataset::sample_shape() const {
  return Shape(samples.shape().begin() + 1, samples.shape().end());
}

std::span<const double> Dataset::sample(std::size_t i) const {
  const std::size_t width = sample_size();
  return samples.data().subspan(i * width, width);
}

Dataset Dataset::WithSampleShape(Shape shape) const {
  Shape full{size()};
  full.insert(full.end(), shape.begin(), shape.end());
  return Dataset{samples.Reshaped(std::move(full)), labels, num_classes};
}

Dataset Dataset::Head(std::size_t count) const {
  count = std::min(count, size());
  const std::size_t width = sample_size();
  Shape shape = samples.shape();
  shape[0] = count;
  std::vector<double> data(
      samples.values().begin(),
      samples.values().begin() + static_cast<std::ptrdiff_t>(count * width));
  return Dataset{
      Tensor(std::move(shape), std::move(data)),
      std::vector<int>(labels.begin(),
                       labels.begin() + static_cast<std::ptrdiff_t>(count)),
      num_classes};
}

Dataset ParseMnistIdx(std::span<const std::uint8_t> images,
                      std::span<const std::uint8_t> labels) {
  const std::uint32_t image_magic = ReadBigEndian32(images, 0, "images");
  if (image_magic != kIdxImagesMagic) {
    throw Error(ErrorCode::kFormat, "images: bad magic " + Hex(image_magic) +
                                        " at offset 0, expected " +
                                        Hex(kIdxImagesMagic));
  }
  const std::uint32_t label_magic = ReadBigEndian32(labels, 0, "labels");
  if (label_magic != kIdxLabelsMagic) {
    throw Error(ErrorCode::kFormat, "labels: bad magic " + Hex(label_magic) +
                                        " at offset 0, expected " +
                                        Hex(kIdxLabelsMagic));
  }
  const std::size_t count = ReadBigEndian32(images, 4, "images");
  const std::size_t rows = ReadBigEndian32(images, 8, "images");
  const std::size_t cols = ReadBigEndian32(images, 12, "images");
  const std::size_t label_count = ReadBigEndian32(labels, 4, "labels");
  if (count != label_count) {
    throw Error(ErrorCode::kFormat,
                "labels: count at offset 4 is " + std::to_string(label_count) +
                    " but images declare " + std::to_string(count));
  }
  if (count == 0 || rows == 0 || cols == 0) {
    throw Error(ErrorCode::kFormat, "images: empty dimensions at offset 4");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels) {
    throw Error(ErrorCode::kFormat,
                "images: truncated at offset " + std::to_string(images.size()) +
                    ", need " + std::to_string(16 + count * pixels) + " bytes");
  }
  if (labels.size() < 8 + count) {
    throw Error(ErrorCode::kFormat,
                "labels: truncated at offset " + std::to_string(labels.size()) +
                    ", need " + std::to_string(8 + count) + " bytes");
  }

  Dataset data;
  data.num_classes = 10;
  std::vector<double> values(count * pixels);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(images[16 + i]) / 255.0;
  }
  data.samples = Tensor(Shape{count, 1, rows, cols}, std::move(values));
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = labels[8 + i];
    if (label > 9) {
      throw Error(ErrorCode::kFormat, "labels: value " + std::to_string(label) +
                                          " at offset " +
                                          std::to_string(8 + i));
    }
    data.labels[i] = label;
  }
  return data;
}

Dataset LoadMnistIdx(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
  const auto images = ReadFile(images_path);
  const auto labels = ReadFile(labels_path);
  return ParseMnistIdx(images, labels);
}

std::filesystem::path MnistImagesPath(const std::filesystem::path& dir) {
  return dir / "train-images-idx3-ubyte";
}

std::filesystem::path MnistLabelsPath(const std::filesystem::path& dir) {
  return dir / "train-labels-idx1-ubyte";
}

std::filesystem::path DefaultDataDir() {
  const char* env = std::getenv(kDataDirEnv);
  return env == nullptr ? std::filesystem::path() : std::filesystem::path(env);
}

Matrix SyntheticClassMeans(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) {
    throw Error(ErrorCode::kDomain, "synthetic data needs >= 2 classes");
  }
  const std::size_t dim = ShapeSize(spec.sample_shape);
  if (dim == 0 || spec.sample_shape.empty()) {
    throw Error(ErrorCode::kDomain, "synthetic data needs dim >= 1");
  }
  const double min_gap = 4.0 * spec.blob_std;
  Rng rng = MakeRng(spec.seed, {Tag(Stream::kPartition), 0});
  double spread = min_gap;
  Matrix means(spec.num_classes, dim);
  for (int attempt = 0;; ++attempt) {
    std::normal_distribution<double> dist(0.0, spread);
    for (double& v : means.data()) v = dist(rng);
    bool separated = true;
    for (std::size_t a = 0; a < spec.num_classes && separated; ++a) {
      for (std::size_t b = a + 1; b < spec.num_classes; ++b) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double diff = means(a, j) - means(b, j);
          d2 += diff * diff;
        }
        if (std::sqrt(d2) < min_gap) {
          separated = false;
          break;
        }
      }
    }
    if (separated) return means;
    // Low dimension with many classes needs a wider spread.
    if (attempt % 8 == 7) spread *= 1.5;
  }
}

Dataset GenerateSynthetic(const SyntheticSpec& spec) {
  const Matrix means = SyntheticClassMeans(spec);
  const std::size_t dim = means.cols();
  if (spec.count == 0) {
    throw Error(ErrorCode::kDomain, "synthetic data needs count >= 1");
  }
  Rng rng = MakeRng(spec.seed, {Tag(Stream::kPartition), 1});
  std::uniform_int_distribution<int> pick(
      0, static_cast<int>(spec.num_classes) - 1);
  std::normal_distribution<double> noise(0.0, spec.blob_std);

  Dataset data;
  data.num_classes = spec.num_classes;
  data.labels.resize(spec.count);
  std::vector<double> values(spec.count * dim);
  for (std::size_t k = 0; k < spec.count; ++k) {
    const int c = pick(rng);
    data.labels[k] = c;
    for (std::size_t j = 0; j < dim; ++j) {
      values[k * dim + j] = means(static_cast<std::size_t>(c), j) + noise(rng);
    }
  }
  Shape shape{spec.count};
  shape.insert(shape.end(), spec.sample_shape.begin(), spec.sample_shape.end());
  data.samples = Tensor(std::move(shape), std::move(values));
  return data;
}

}  // namespace labelfish
