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

#ifndef LABELFISH_IO_H_
#define LABELFISH_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelfish/attack.h"
#include "labelfish/federation.h"
#include "labelfish/nn.h"

namespace labelfish {

// Binary little-endian snapshots. Doubles are stored as their IEEE-754 bit
// patterns, so a save/load cycle is bit-exact.
//
// Model:  "LFMD" u32 version, input shape, u64 layer count, then per layer
//         u8 kind, kind fields, u64 + tensors (params), u64 + tensors
//         (buffers). A tensor is u64 rank, u64 dims..., f64 values...
// Record: "LFRR" u32 version, round header, clients, counts, per-client
//         gradient sets, aggregate, per-client models.
std::vector<std::uint8_t> SerializeModel(const Model& model);
Model ParseModel(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> SerializeRoundRecord(const RoundRecord& record);
RoundRecord ParseRoundRecord(std::span<const std::uint8_t> bytes);

// JSON list of per-client results.
std::string AttackResultsToJson(std::span<const AttackResult> results);
std::vector<AttackResult> AttackResultsFromJson(std::string_view json);

void WriteFile(const std::filesystem::path& path,
               std::span<const std::uint8_t> bytes);
void WriteFile(const std::filesystem::path& path, std::string_view text);
std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path);

void SaveModel(const Model& model, const std::filesystem::path& path);
Model LoadModel(const std::filesystem::path& path);
void SaveRoundRecord(const RoundRecord& record,
                     const std::filesystem::path& path);
RoundRecord LoadRoundRecord(const std::filesystem::path& path);

}  // namespace labelfish

#endif  // LABELFISH_IO_H_
