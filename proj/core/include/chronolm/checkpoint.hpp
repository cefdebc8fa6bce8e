/*
 * Copyright 2026 The chronolm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chronolm/model.hpp"

namespace chronolm {

struct CheckpointMetadata {
  std::string tokenizer_hash;
  std::string role;  // "teacher", "student", ...
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::optional<double> val_loss;
  std::map<std::string, std::string> extra;
};

struct LoadedCheckpoint {
  Transformer model;
  CheckpointMetadata metadata;
  std::vector<std::string> warnings;
};

/// Binary container: 8-byte magic "CHRONOLM", u32 version, u64 header
/// length, a JSON header (config, metadata, tensor table, data digest), then
/// row-major little-endian f64 tensor data. See docs/checkpoint_format.md.
void save_checkpoint(const Transformer& model, const CheckpointMetadata& metadata,
                     const std::filesystem::path& path);
std::string serialize_checkpoint(const Transformer& model, const CheckpointMetadata& metadata);

/// Throws FormatError on truncation, corruption or shape mismatch. A
/// tokenizer hash differing from `expected_tokenizer_hash` is reported in
/// warnings, not thrown.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<std::string>& expected_tokenizer_hash = {});
LoadedCheckpoint parse_checkpoint(const std::string& bytes,
                                  const std::optional<std::string>& expected_tokenizer_hash = {});

}  // namespace chronolm
