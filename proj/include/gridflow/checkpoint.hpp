/* Copyright 2026 The gridflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Checkpoint container: header, opaque instance snapshot and data section.

#include <cstdint>
#include <string>
#include <string_view>

#include "gridflow/data.hpp"
#include "gridflow/fault.hpp"
#include "json.hpp"

namespace gridflow {

inline constexpr std::string_view kCheckpointMagic = "GFCK";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string checkpoint_id;  // "<instance_id>#<counter>"
  CheckpointMode mode = CheckpointMode::Light;
  std::string instance_id;
  double at = 0.0;
  nlohmann::ordered_json snapshot;
  // Light: where each live file was. Heavy: what the store holds a copy of.
  ReplicaCatalog data;
  std::uint64_t store_bytes = 0;  // bytes this checkpoint added to the store
};

// Three JSON lines: header, snapshot, data.
std::string encode_checkpoint(const Checkpoint& checkpoint);
// Throws CorruptCheckpoint, including for an unknown version.
Checkpoint decode_checkpoint(std::string_view text);

// Writes to "<path>.tmp" and renames over `path`. Throws IoError.
void write_checkpoint(const Checkpoint& checkpoint, const std::string& path);
// Throws IoError, CorruptCheckpoint.
Checkpoint read_checkpoint(const std::string& path);

// Lfns of a light checkpoint whose recorded replicas are gone from `current`.
std::vector<std::string> missing_replicas(const Checkpoint& checkpoint, const ReplicaCatalog& current);

}  // namespace gridflow
