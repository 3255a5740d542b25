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

#ifndef LABELFISH_DEFENSES_H_
#define LABELFISH_DEFENSES_H_

#include <cstdint>
#include <string>
#include <string_view>

#include "labelfish/nn.h"
#include "labelfish/random.h"

namespace labelfish {

enum class DefenseKind { kNone, kGaussian, kCompression };

std::string_view DefenseKindName(DefenseKind kind);
DefenseKind ParseDefenseKind(std::string_view name);

struct DefenseConfig {
  DefenseKind kind = DefenseKind::kNone;
  double sigma = 0.0;  // absolute noise std, kGaussian
  double theta = 0.0;  // fraction of entries zeroed, kCompression
  std::uint64_t seed = 0;

  // Throws a config error unless sigma >= 0 and 0 <= theta < 1.
  void Validate() const;
};

// Adds independent N(0, sigma^2) noise to every entry. sigma == 0 returns an
// exact copy.
GradientSet ApplyGaussian(const GradientSet& grads, double sigma, Rng& rng);

// Zeroes the floor(theta * size) entries of smallest magnitude across the
// whole set. Among equal magnitudes the lower flat index is dropped first.
GradientSet ApplyCompression(const GradientSet& grads, double theta);

// Applies `config` to one client's gradients for one round. Noise is drawn
// from a stream keyed by (config.seed, round, client).
GradientSet ApplyDefense(const GradientSet& grads, const DefenseConfig& config,
                         std::uint64_t round, std::uint32_t client_id);

}  // namespace labelfish

#endif  // LABELFISH_DEFENSES_H_
