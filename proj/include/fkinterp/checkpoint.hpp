// Copyright 2026 The fkinterp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary checkpoint container. The byte layout is documented in
// docs/checkpoint_format.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "fkinterp/interp_net.hpp"
#include "fkinterp/optimizer.hpp"

namespace fkinterp {

inline constexpr char kCheckpointMagic[8] = {'F', 'K', 'I', 'N', 'T', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetConfig config;
  Parameters weights;
  std::uint64_t step = 0;
  std::optional<AdamaxState> optimizer;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError (kCorrupt / kVersionMismatch).
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// Throws IoError if the file cannot be written.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws IoError if the file cannot be read, CheckpointError otherwise.
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// As above, and throws CheckpointError(kConfigMismatch) unless the stored
/// configuration equals `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetConfig& expected);

}  // namespace fkinterp
