// Copyright 2026 The lfgrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary model files.
//
// Layout (little-endian):
//   "LFG1"                      magic
//   u32 version                 currently 1
//   { u32 tag, u64 length, bytes[length] }*
//   u64 checksum                FNV-1a 64 of every byte before it
//
// Matrices are stored as u64 rows, u64 cols, then row-major f64 data.
// Unknown section tags are skipped, so later versions can add sections.

#ifndef LFGREC_MODEL_IO_HPP_
#define LFGREC_MODEL_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "lfgrec/baselines.hpp"
#include "lfgrec/generator.hpp"

namespace lfgrec {

inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class ModelKind : std::uint32_t { kLfg = 1, kFunkSvd = 2, kBiasSvd = 3 };

std::uint64_t Fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> SerializeModel(const LfgModel& model);
std::vector<std::uint8_t> SerializeModel(const BaselineModel& model);

using AnyModel = std::variant<LfgModel, BaselineModel>;

// Throws FormatError (bad magic, truncation, malformed section),
// VersionError (unsupported version) or ChecksumError.
AnyModel DeserializeModel(std::span<const std::uint8_t> bytes);

// Writes to a temporary sibling and renames it into place.
void SaveModel(const AnyModel& model, const std::filesystem::path& path);
AnyModel LoadModel(const std::filesystem::path& path);
// As LoadModel, but throws FormatError unless the file holds a generator.
LfgModel LoadLfgModel(const std::filesystem::path& path);

}  // namespace lfgrec

#endif  // LFGREC_MODEL_IO_HPP_
