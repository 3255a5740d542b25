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

#ifndef LABELFISH_DATA_H_
#define LABELFISH_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "labelfish/tensor.h"

namespace labelfish {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Environment variable naming the default data directory (MNIST files).
inline constexpr const char* kDataDirEnv = "LABELFISH_DATA_DIR";

// A labelled sample pool. samples is [count, sample_shape...].
struct Dataset {
  Tensor samples;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  std::size_t sample_size() const { return samples.size() / size(); }
  std::span<const double> sample(std::size_t i) const;

  // Same data with every sample reshaped (element count must match).
  Dataset WithSampleShape(Shape shape) const;
  // Rows [0, count).
  Dataset Head(std::size_t count) const;
};

// IDX (big-endian) MNIST images + labels. Pixels are scaled to [0, 1] and
// samples are shaped [1, rows, cols].
Dataset LoadMnistIdx(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path);

// Parsers over in-memory bytes, used by LoadMnistIdx.
Dataset ParseMnistIdx(std::span<const std::uint8_t> images,
                      std::span<const std::uint8_t> labels);

// Default MNIST training files inside `dir`.
std::filesystem::path MnistImagesPath(const std::filesystem::path& dir);
std::filesystem::path MnistLabelsPath(const std::filesystem::path& dir);
// Directory from $LABELFISH_DATA_DIR, or empty if unset.
std::filesystem::path DefaultDataDir();

struct SyntheticSpec {
  std::size_t num_classes = 10;
  Shape sample_shape{32};
  std::size_t count = 4096;
  double blob_std = 1.0;
  std::uint64_t seed = 7;
};

// Gaussian class blobs. Class means are seeded and pairwise at least
// 4 * blob_std apart; labels are drawn uniformly over classes.
Dataset GenerateSynthetic(const SyntheticSpec& spec);

// Class means used by GenerateSynthetic (one row per class).
Matrix SyntheticClassMeans(const SyntheticSpec& spec);

}  // namespace labelfish

#endif  // LABELFISH_DATA_H_
