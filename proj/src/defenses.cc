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

#include "labelfish/defenses.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "labelfish/error.h"

namespace labelfish {

std::string_view DefenseKindName(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::kNone:
      return "none";
    case DefenseKind::kGaussian:
      return "gaussian";
    case DefenseKind::kCompression:
      return "compression";
  }
  return "?";
}

DefenseKind ParseDefenseKind(std::string_view name) {
  if (name == "none") return DefenseKind::kNone;
  if (name == "gaussian") return DefenseKind::kGaussian;
  if (name == "compression") return DefenseKind::kCompression;
  throw Error(ErrorCode::kConfig,
              "unknown defense '" + std::string(name) +
                  "' (expected none, gaussian or compression)");
}

void DefenseConfig::Validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kConfig,
                "defense sigma must be >= 0, got " + std::to_string(sigma));
  }
  if (!(theta >= 0.0 && theta < 1.0)) {
    throw Error(ErrorCode::kConfig, "defense theta must be in [0, 1), got " +
                                        std::to_string(theta));
  }
}

GradientSet ApplyGaussian(const GradientSet& grads, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) {
    throw Error(ErrorCode::kDomain, "sigma must be >= 0");
  }
  GradientSet out = grads;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& layer : out.mutable_layers()) {
    for (Tensor& t : layer) {
      for (double& v : t.data()) v += noise(rng);
    }
  }
  return out;
}

GradientSet ApplyCompression(const GradientSet& grads, double theta) {
  if (!(theta >= 0.0 && theta < 1.0)) {
    throw Error(ErrorCode::kDomain, "theta must be in [0, 1)");
  }
  std::vector<double> flat = grads.Flatten();
  const auto drop = static_cast<std::size_t>(
      std::floor(theta * static_cast<double>(flat.size())));
  if (drop == 0) return grads;

  std::vector<std::size_t> order(flat.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto smaller = [&flat](std::size_t a, std::size_t b) {
    const double ma = std::abs(flat[a]), mb = std::abs(flat[b]);
    return ma != mb ? ma < mb : a < b;
  };
  std::nth_element(order.begin(),
                   order.begin() + static_cast<std::ptrdiff_t>(drop - 1),
                   order.end(), smaller);
  for (std::size_t k = 0; k < drop; ++k) flat[order[k]] = 0.0;

  GradientSet out = grads;
  out.Unflatten(flat);
  return out;
}

GradientSet ApplyDefense(const GradientSet& grads, const DefenseConfig& config,
                         std::uint64_t round, std::uint32_t client_id) {
  config.Validate();
  switch (config.kind) {
    case DefenseKind::kNone:
      return grads;
    case DefenseKind::kGaussian: {
      Rng rng = MakeRng(config.seed, {Tag(Stream::kDefense), round, client_id});
      return ApplyGaussian(grads, config.sigma, rng);
    }
    case DefenseKind::kCompression:
      return ApplyCompression(grads, config.theta);
  }
  return grads;
}

}  // namespace labelfish
