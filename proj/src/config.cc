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

#include "labelfish/config.h"

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "labelfish/data.h"
#include "labelfish/error.h"
#include "yaml-cpp/yaml.h"

namespace labelfish {

namespace {

[[noreturn]] void Bad(const std::string& msg) {
  throw Error(ErrorCode::kConfig, msg);
}

// Rejects keys outside `allowed` so typos do not silently fall back to
// defaults.
void CheckKeys(const YAML::Node& node, const std::string& where,
               const std::set<std::string>& allowed) {
  if (!node) return;
  if (!node.IsMap()) Bad(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) Bad("unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void Read(const YAML::Node& node, const char* key, const std::string& where,
          T& out) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    Bad("bad value for " + where + "." + key);
  }
}

std::string_view DatasetName(DatasetKind k) {
  return k == DatasetKind::kMnist ? "mnist" : "synthetic";
}
std::string_view ModelName(ModelKind k) {
  return k == ModelKind::kCnnBn ? "cnn_bn" : "fcn3";
}

}  // namespace

std::size_t ExperimentConfig::EmbeddingDim() const {
  return model.kind == ModelKind::kFcn3 ? model.hidden2 : model.hidden;
}

void ExperimentConfig::Validate() const {
  if (clients == 0) Bad("federation.clients must be >= 1");
  if (per_round == 0 || per_round > clients) {
    Bad("federation.per_round must be in [1, clients=" +
        std::to_string(clients) + "], got " + std::to_string(per_round));
  }
  if (batch_size == 0) Bad("federation.batch_size must be >= 1");
  if (!(label_skew >= 0.0)) Bad("federation.label_skew must be >= 0");
  if (trials == 0) Bad("trials must be >= 1");
  if (attack.enabled && per_round > EmbeddingDim() + 1) {
    Bad("attack needs per_round <= embedding dim + 1 = " +
        std::to_string(EmbeddingDim() + 1) + ", got " +
        std::to_string(per_round));
  }
  if (secure_agg.scale_bits < 0 || secure_agg.scale_bits > 38) {
    Bad("secure_agg.scale_bits must be in [0, 38]");
  }
  defense.Validate();
  if (dataset.classes < 2) Bad("dataset.classes must be >= 2");
  if (dataset.kind == DatasetKind::kSynthetic) {
    if (dataset.shape.empty() || ShapeSize(dataset.shape) == 0) {
      Bad("dataset.shape must have positive extents");
    }
    if (dataset.pool == 0) Bad("dataset.pool must be >= 1");
  } else {
    const auto dir = ResolveMnistDir(dataset);
    if (dir.empty()) {
      Bad("dataset.kind is mnist but neither dataset.mnist_dir nor $" +
          std::string(kDataDirEnv) + " is set");
    }
    for (const auto& p : {MnistImagesPath(dir), MnistLabelsPath(dir)}) {
      if (!std::filesystem::exists(p)) Bad("missing MNIST file " + p.string());
    }
  }
  const bool conv = model.kind == ModelKind::kCnnBn;
  if (conv && (model.channels == 0 || model.kernel == 0 || model.hidden == 0)) {
    Bad("model.channels, model.kernel and model.hidden must be >= 1");
  }
  if (!conv && (model.hidden1 == 0 || model.hidden2 == 0)) {
    Bad("model.hidden1 and model.hidden2 must be >= 1");
  }
}

std::filesystem::path ResolveMnistDir(const DatasetConfig& dataset) {
  if (!dataset.mnist_dir.empty()) return dataset.mnist_dir;
  return DefaultDataDir();
}

ExperimentConfig ParseConfig(std::string_view yaml) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    Bad(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  CheckKeys(root, "config",
            {"dataset", "model", "federation", "secure_agg", "attack",
             "defense", "trials", "seed", "output"});

  const YAML::Node d = root["dataset"];
  CheckKeys(d, "dataset",
            {"kind", "classes", "shape", "pool", "blob_std", "seed",
             "mnist_dir", "mnist_limit"});
  std::string kind = std::string(DatasetName(c.dataset.kind));
  Read(d, "kind", "dataset", kind);
  if (kind == "synthetic") {
    c.dataset.kind = DatasetKind::kSynthetic;
  } else if (kind == "mnist") {
    c.dataset.kind = DatasetKind::kMnist;
  } else {
    Bad("dataset.kind must be synthetic or mnist, got '" + kind + "'");
  }
  Read(d, "classes", "dataset", c.dataset.classes);
  Read(d, "shape", "dataset", c.dataset.shape);
  Read(d, "pool", "dataset", c.dataset.pool);
  Read(d, "blob_std", "dataset", c.dataset.blob_std);
  Read(d, "seed", "dataset", c.dataset.seed);
  Read(d, "mnist_dir", "dataset", c.dataset.mnist_dir);
  Read(d, "mnist_limit", "dataset", c.dataset.mnist_limit);

  const YAML::Node m = root["model"];
  CheckKeys(m, "model",
            {"kind", "hidden1", "hidden2", "channels", "kernel", "hidden"});
  std::string model_kind = std::string(ModelName(c.model.kind));
  Read(m, "kind", "model", model_kind);
  if (model_kind == "fcn3") {
    c.model.kind = ModelKind::kFcn3;
  } else if (model_kind == "cnn_bn") {
    c.model.kind = ModelKind::kCnnBn;
  } else {
    Bad("model.kind must be fcn3 or cnn_bn, got '" + model_kind + "'");
  }
  Read(m, "hidden1", "model", c.model.hidden1);
  Read(m, "hidden2", "model", c.model.hidden2);
  Read(m, "channels", "model", c.model.channels);
  Read(m, "kernel", "model", c.model.kernel);
  Read(m, "hidden", "model", c.model.hidden);

  const YAML::Node f = root["federation"];
  CheckKeys(
      f, "federation",
      {"clients", "per_round", "batch_size", "label_skew", "learning_rate"});
  Read(f, "clients", "federation", c.clients);
  Read(f, "per_round", "federation", c.per_round);
  Read(f, "batch_size", "federation", c.batch_size);
  Read(f, "label_skew", "federation", c.label_skew);
  Read(f, "learning_rate", "federation", c.learning_rate);

  const YAML::Node s = root["secure_agg"];
  CheckKeys(s, "secure_agg", {"mode", "scale_bits"});
  std::string mode = "ideal";
  Read(s, "mode", "secure_agg", mode);
  if (mode == "ideal") {
    c.secure_agg.mode = SaMode::kIdeal;
  } else if (mode == "masked") {
    c.secure_agg.mode = SaMode::kMasked;
  } else {
    Bad("secure_agg.mode must be ideal or masked, got '" + mode + "'");
  }
  Read(s, "scale_bits", "secure_agg", c.secure_agg.scale_bits);

  const YAML::Node a = root["attack"];
  CheckKeys(
      a, "attack",
      {"enabled", "policy", "repair", "min_rcond", "max_retries", "cossim"});
  Read(a, "enabled", "attack", c.attack.enabled);
  std::string policy = std::string(FishingPolicyName(c.attack.policy));
  Read(a, "policy", "attack", policy);
  c.attack.policy = ParseFishingPolicy(policy);
  Read(a, "repair", "attack", c.attack.repair);
  Read(a, "min_rcond", "attack", c.attack.min_rcond);
  Read(a, "max_retries", "attack", c.attack.max_retries);
  Read(a, "cossim", "attack", c.attack.cossim);

  const YAML::Node df = root["defense"];
  CheckKeys(df, "defense", {"kind", "sigma", "theta", "seed"});
  std::string defense = "none";
  Read(df, "kind", "defense", defense);
  c.defense.kind = ParseDefenseKind(defense);
  Read(df, "sigma", "defense", c.defense.sigma);
  Read(df, "theta", "defense", c.defense.theta);
  Read(df, "seed", "defense", c.defense.seed);

  Read(root, "trials", "config", c.trials);
  Read(root, "seed", "config", c.seed);
  Read(root, "output", "config", c.output);
  return c;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str());
}

std::string ConfigToYaml(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value
      << std::string(DatasetName(c.dataset.kind));
  out << YAML::Key << "classes" << YAML::Value << c.dataset.classes;
  out << YAML::Key << "shape" << YAML::Value << YAML::Flow << c.dataset.shape;
  out << YAML::Key << "pool" << YAML::Value << c.dataset.pool;
  out << YAML::Key << "blob_std" << YAML::Value << c.dataset.blob_std;
  out << YAML::Key << "seed" << YAML::Value << c.dataset.seed;
  out << YAML::Key << "mnist_dir" << YAML::Value << c.dataset.mnist_dir;
  out << YAML::Key << "mnist_limit" << YAML::Value << c.dataset.mnist_limit;
  out << YAML::EndMap;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value
      << std::string(ModelName(c.model.kind));
  out << YAML::Key << "hidden1" << YAML::Value << c.model.hidden1;
  out << YAML::Key << "hidden2" << YAML::Value << c.model.hidden2;
  out << YAML::Key << "channels" << YAML::Value << c.model.channels;
  out << YAML::Key << "kernel" << YAML::Value << c.model.kernel;
  out << YAML::Key << "hidden" << YAML::Value << c.model.hidden;
  out << YAML::EndMap;

  out << YAML::Key << "federation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "clients" << YAML::Value << c.clients;
  out << YAML::Key << "per_round" << YAML::Value << c.per_round;
  out << YAML::Key << "batch_size" << YAML::Value << c.batch_size;
  out << YAML::Key << "label_skew" << YAML::Value << c.label_skew;
  out << YAML::Key << "learning_rate" << YAML::Value << c.learning_rate;
  out << YAML::EndMap;

  out << YAML::Key << "secure_agg" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value
      << (c.secure_agg.mode == SaMode::kMasked ? "masked" : "ideal");
  out << YAML::Key << "scale_bits" << YAML::Value << c.secure_agg.scale_bits;
  out << YAML::EndMap;

  out << YAML::Key << "attack" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << c.attack.enabled;
  out << YAML::Key << "policy" << YAML::Value
      << std::string(FishingPolicyName(c.attack.policy));
  out << YAML::Key << "repair" << YAML::Value << c.attack.repair;
  out << YAML::Key << "min_rcond" << YAML::Value << c.attack.min_rcond;
  out << YAML::Key << "max_retries" << YAML::Value << c.attack.max_retries;
  out << YAML::Key << "cossim" << YAML::Value << c.attack.cossim;
  out << YAML::EndMap;

  out << YAML::Key << "defense" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value
      << std::string(DefenseKindName(c.defense.kind));
  out << YAML::Key << "sigma" << YAML::Value << c.defense.sigma;
  out << YAML::Key << "theta" << YAML::Value << c.defense.theta;
  out << YAML::Key << "seed" << YAML::Value << c.defense.seed;
  out << YAML::EndMap;

  out << YAML::Key << "trials" << YAML::Value << c.trials;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "output" << YAML::Value << c.output;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace labelfish
