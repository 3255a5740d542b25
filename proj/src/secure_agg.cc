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

#include "labelfish/secure_agg.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "bytes.h"
#include "labelfish/error.h"
#include "labelfish/random.h"

namespace labelfish {

namespace {

void CheckScaleBits(int scale_bits) {
  if (scale_bits < 0 || scale_bits > 38) {
    throw Error(ErrorCode::kConfig, "scale bits must be in [0, 38], got " +
                                        std::to_string(scale_bits));
  }
}

}  // namespace

MaskPlan::MaskPlan(std::vector<ClientId> participants, std::uint64_t round_seed)
    : participants_(std::move(participants)), round_seed_(round_seed) {
  std::sort(participants_.begin(), participants_.end());
  if (std::adjacent_find(participants_.begin(), participants_.end()) !=
      participants_.end()) {
    throw Error(ErrorCode::kProtocol, "duplicate participant in mask plan");
  }
}

bool MaskPlan::Contains(ClientId id) const {
  return std::binary_search(participants_.begin(), participants_.end(), id);
}

std::uint64_t MaskPlan::PairSeed(ClientId a, ClientId b) const {
  const ClientId lo = std::min(a, b), hi = std::max(a, b);
  return DeriveSeed(round_seed_, {Tag(Stream::kMask), lo, hi});
}

std::uint64_t MaskWord(std::uint64_t pair_seed, std::uint64_t index) {
  return Mix64(pair_seed ^ Mix64(index));
}

std::vector<std::uint64_t> MaskPlan::NetMask(ClientId id,
                                             std::size_t length) const {
  if (!Contains(id)) {
    throw Error(ErrorCode::kProtocol,
                "client " + std::to_string(id) + " is not in the mask plan");
  }
  std::vector<std::uint64_t> mask(length, 0);
  for (ClientId other : participants_) {
    if (other == id) continue;
    const std::uint64_t seed = PairSeed(id, other);
    if (id < other) {
      for (std::size_t i = 0; i < length; ++i) mask[i] += MaskWord(seed, i);
    } else {
      for (std::size_t i = 0; i < length; ++i) mask[i] -= MaskWord(seed, i);
    }
  }
  return mask;
}

double ScaleFactor(int scale_bits) {
  CheckScaleBits(scale_bits);
  return std::ldexp(1.0, scale_bits);
}

double ClipBound(int scale_bits) {
  return std::ldexp(1.0, 39) / ScaleFactor(scale_bits);
}

std::uint64_t Quantize(double value, int scale_bits) {
  if (!(std::abs(value) < ClipBound(scale_bits))) {
    throw Error(ErrorCode::kRange, "gradient magnitude " +
                                       std::to_string(value) +
                                       " exceeds the fixed-point clip bound " +
                                       std::to_string(ClipBound(scale_bits)));
  }
  const auto q =
      static_cast<std::int64_t>(std::llround(value * ScaleFactor(scale_bits)));
  return static_cast<std::uint64_t>(q);
}

double Dequantize(std::uint64_t residue, int scale_bits) {
  return static_cast<double>(static_cast<std::int64_t>(residue)) /
         ScaleFactor(scale_bits);
}

MaskedUpdate Encode(const GradientSet& grads, const MaskPlan& plan,
                    ClientId client_id, const SecureAggConfig& config) {
  CheckScaleBits(config.scale_bits);
  if (!plan.Contains(client_id)) {
    throw Error(ErrorCode::kProtocol, "client " + std::to_string(client_id) +
                                          " is not in the mask plan");
  }
  MaskedUpdate update;
  update.client_id = client_id;
  update.mode = config.mode;
  update.scale_bits = static_cast<std::uint8_t>(config.scale_bits);

  const std::vector<double> flat = grads.Flatten();
  update.payload.resize(flat.size());
  if (config.mode == SaMode::kIdeal) {
    for (std::size_t i = 0; i < flat.size(); ++i) {
      update.payload[i] = std::bit_cast<std::uint64_t>(flat[i]);
    }
    return update;
  }
  for (std::size_t i = 0; i < flat.size(); ++i) {
    update.payload[i] = Quantize(flat[i], config.scale_bits);
  }
  const std::vector<std::uint64_t> mask = plan.NetMask(client_id, flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) update.payload[i] += mask[i];
  return update;
}

GradientSet AggregateDecode(std::span<const MaskedUpdate> updates,
                            const MaskPlan& plan,
                            const std::vector<Shape>& layout) {
  if (updates.empty()) {
    throw Error(ErrorCode::kProtocol, "no updates to aggregate");
  }
  const SaMode mode = updates.front().mode;
  const std::uint8_t scale_bits = updates.front().scale_bits;
  const std::size_t length = updates.front().payload.size();

  std::vector<ClientId> seen;
  for (const MaskedUpdate& u : updates) {
    if (u.mode != mode || u.scale_bits != scale_bits) {
      throw Error(ErrorCode::kContract,
                  "updates mix secure-aggregation modes or scales");
    }
    if (u.payload.size() != length) {
      throw Error(ErrorCode::kContract, "updates differ in payload length");
    }
    if (!plan.Contains(u.client_id)) {
      throw Error(ErrorCode::kProtocol, "update from unexpected client " +
                                            std::to_string(u.client_id));
    }
    seen.push_back(u.client_id);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw Error(ErrorCode::kProtocol, "duplicate update in aggregation");
  }
  if (seen != plan.participants()) {
    throw Error(ErrorCode::kProtocol,
                "missing update: " + std::to_string(seen.size()) + " of " +
                    std::to_string(plan.participants().size()) +
                    " clients responded (dropout is unsupported)");
  }

  std::vector<double> sum(length, 0.0);
  if (mode == SaMode::kIdeal) {
    for (const MaskedUpdate& u : updates) {
      for (std::size_t i = 0; i < length; ++i) {
        sum[i] += std::bit_cast<double>(u.payload[i]);
      }
    }
  } else {
    std::vector<std::uint64_t> acc(length, 0);
    for (const MaskedUpdate& u : updates) {
      for (std::size_t i = 0; i < length; ++i) acc[i] += u.payload[i];
    }
    for (std::size_t i = 0; i < length; ++i) {
      sum[i] = Dequantize(acc[i], scale_bits);
    }
  }
  return GradientSet::FromLayout(layout, sum);
}

std::vector<std::uint8_t> SerializeMaskedUpdate(const MaskedUpdate& update) {
  internal::ByteWriter out;
  out.bytes().reserve(14 + 8 * update.payload.size());
  out.U32(update.client_id);
  out.U8(static_cast<std::uint8_t>(update.mode));
  out.U8(update.scale_bits);
  out.U64(update.payload.size());
  for (std::uint64_t w : update.payload) out.U64(w);
  return out.Take();
}

MaskedUpdate ParseMaskedUpdate(std::span<const std::uint8_t> bytes) {
  internal::ByteReader in(bytes, "masked update");
  MaskedUpdate update;
  update.client_id = in.U32();
  const std::uint8_t mode = in.U8();
  if (mode > 1) in.Fail("unknown mode " + std::to_string(mode));
  update.mode = static_cast<SaMode>(mode);
  update.scale_bits = in.U8();
  update.payload.resize(in.Count(8));
  for (std::uint64_t& w : update.payload) w = in.U64();
  in.ExpectDone();
  return update;
}

}  // namespace labelfish
