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

#ifndef LABELFISH_RANDOM_H_
#define LABELFISH_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace labelfish {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for a (base, tag...) path. Streams for different
// purposes (client selection, batch draws, noise) never share state, so
// adding or removing one consumer does not shift the others.
inline std::uint64_t DeriveSeed(std::uint64_t base,
                                std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = Mix64(base);
  for (std::uint64_t tag : tags) h = Mix64(h ^ Mix64(tag));
  return h;
}

inline Rng MakeRng(std::uint64_t base,
                   std::initializer_list<std::uint64_t> tags) {
  return Rng(DeriveSeed(base, tags));
}

// Stream tags.
enum class Stream : std::uint64_t {
  kModelInit = 1,
  kClientSelection = 2,
  kBatch = 3,
  kDefense = 4,
  kFishing = 5,
  kMask = 6,
  kProbe = 7,
  kPartition = 8,
  kTrial = 9,
};

constexpr std::uint64_t Tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace labelfish

#endif  // LABELFISH_RANDOM_H_
