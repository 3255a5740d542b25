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

#ifndef LABELFISH_CONFIG_H_
#define LABELFISH_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "labelfish/attack.h"
#include "labelfish/defenses.h"
#include "labelfish/secure_agg.h"
#include "labelfish/tensor.h"

namespace labelfish {

enum class DatasetKind { kSynthetic, kMnist };
enum class ModelKind { kFcn3, kCnnBn };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kSynthetic;
  // Synthetic blobs. The default sample shape matches flattened MNIST.
  std::size_t classes = 10;
  Shape shape{784};
  std::size_t pool = 4096;
  double blob_std = 1.0;
  std::uint64_t seed = 7;
  // MNIST. An empty dir falls back to $LABELFISH_DATA_DIR.
  std::string mnist_dir;
  std::size_t mnist_limit = 10000;  // first N training images; 0 = all
};

struct ModelConfig {
  ModelKind kind = ModelKind::kFcn3;
  std::size_t hidden1 = 256;  // FCN-3
  std::size_t hidden2 = 128;  // FCN-3
  std::size_t channels = 16;  // CNN-BN
  std::size_t kernel = 3;     // CNN-BN
  std::size_t hidden = 128;   // CNN-BN
};

struct AttackConfig {
  bool enabled = true;
  FishingPolicy policy = FishingPolicy::kPerFeature;
  bool repair = false;
  double min_rcond = 1e-8;
  int max_retries = 16;
  // Replays each attacked round benignly to measure CosSim.
  bool cossim = true;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  std::size_t clients = 100;    // N
  std::size_t per_round = 5;    // U
  std::size_t batch_size = 64;  // B
  double label_skew = 0.0;      // Dirichlet alpha; 0 = uniform labels
  double learning_rate = 0.1;
  SecureAggConfig secure_agg;
  AttackConfig attack;
  DefenseConfig defense;
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  std::string output = "report.csv";

  // Embedding width m of the configured model.
  std::size_t EmbeddingDim() const;
  // Throws a config error on any violated invariant.
  void Validate() const;
};

ExperimentConfig ParseConfig(std::string_view yaml);
ExperimentConfig LoadConfig(const std::filesystem::path& path);
// Full config as YAML; ParseConfig(ConfigToYaml(c)) reproduces c.
std::string ConfigToYaml(const ExperimentConfig& config);

// MNIST directory for a config: dataset.mnist_dir or $LABELFISH_DATA_DIR.
std::filesystem::path ResolveMnistDir(const DatasetConfig& dataset);

}  // namespace labelfish

#endif  // LABELFISH_CONFIG_H_
