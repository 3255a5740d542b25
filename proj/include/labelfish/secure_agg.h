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

#ifndef LABELFISH_SECURE_AGG_H_
#define LABELFISH_SECURE_AGG_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "labelfish/nn.h"

namespace labelfish {

using ClientId = std::uint32_t;

// kIdeal sums real-valued gradients exactly; kMasked quantizes to fixed point
// and hides each update behind pairwise masks that cancel in the sum.
enum class SaMode : std::uint8_t { kIdeal = 0, kMasked = 1 };

inline constexpr int kDefaultScaleBits = 24;

struct SecureAggConfig {
  SaMode mode = SaMode::kIdeal;
  int scale_bits = kDefaultScaleBits;  // s = 2^scale_bits
};

// One client's encoded contribution. In masked mode the payload holds
// residues mod 2^64; in ideal mode it holds the bit patterns of the doubles.
struct MaskedUpdate {
  ClientId client_id = 0;
  SaMode mode = SaMode::kIdeal;
  std::uint8_t scale_bits = 0;
  std::vector<std::uint64_t> payload;

  friend bool operator==(const MaskedUpdate&, const MaskedUpdate&) = default;
};

// Pairwise mask schedule for one round. For every pair u < v (by client id)
// a seed derived from the round seed expands into a pseudorandom vector;
// u adds it and v subtracts it, so the masks of all participants sum to zero
// mod 2^64.
class MaskPlan {
 public:
  MaskPlan(std::vector<ClientId> participants, std::uint64_t round_seed);

  const std::vector<ClientId>& participants() const { return participants_; }
  bool Contains(ClientId id) const;

  std::uint64_t PairSeed(ClientId a, ClientId b) const;
  // Net mask applied by `id`: sum of +m_{id,v} for v > id and -m_{u,id} for
  // u < id.
  std::vector<std::uint64_t> NetMask(ClientId id, std::size_t length) const;

 private:
  std::vector<ClientId> participants_;  // sorted, unique
  std::uint64_t round_seed_;
};

// Element i of the pseudorandom stream for a pair seed.
std::uint64_t MaskWord(std::uint64_t pair_seed, std::uint64_t index);

double ScaleFactor(int scale_bits);
// |g| must stay below this bound in masked mode: 2^39 / s.
double ClipBound(int scale_bits);
// Round-to-nearest fixed point, two's complement in 64 bits.
std::uint64_t Quantize(double value, int scale_bits);
double Dequantize(std::uint64_t residue, int scale_bits);

MaskedUpdate Encode(const GradientSet& grads, const MaskPlan& plan,
                    ClientId client_id, const SecureAggConfig& config);

// Sum of all participants' gradients. Every client in `plan` must appear
// exactly once; `layout` is GradientSet::Layout() of the shared model.
GradientSet AggregateDecode(std::span<const MaskedUpdate> updates,
                            const MaskPlan& plan,
                            const std::vector<Shape>& layout);

// Wire format: client_id u32, mode u8, k u8, length u64, then `length`
// u64 words, all little-endian.
std::vector<std::uint8_t> SerializeMaskedUpdate(const MaskedUpdate& update);
MaskedUpdate ParseMaskedUpdate(std::span<const std::uint8_t> bytes);

}  // namespace labelfish

#endif  // LABELFISH_SECURE_AGG_H_
