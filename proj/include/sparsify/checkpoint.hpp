// Copyright 2026 The Sparsify Authors.
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

#ifndef SPARSIFY_CHECKPOINT_HPP_
#define SPARSIFY_CHECKPOINT_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "sparsify/mask.hpp"
#include "sparsify/model.hpp"

namespace sparsify {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, little-endian throughout:
//   "GMPF" | u32 version | u32 n + JSON header (config, provenance, value format)
//   | u32 count, then per parameter: path, u8 prunable, u32 rank, u64 dims, f32 values
//   | u32 count, then per mask: path, u64 rows, u64 cols, LSB-first packed bits
//   | u32 CRC-32 of everything before it
// Strings are u32 length + bytes. Values are stored as 32-bit floats, so a
// save/load cycle rounds parameters to float precision.
struct Checkpoint {
  ModelConfig config;
  // One entry per run that produced or modified the weights, oldest first.
  std::vector<std::string> provenance;
  ModelParams params;
  // Every prunable path has a mask; all-ones for dense models.
  MaskSet masks;

  // Freshly initialized dense model.
  static Checkpoint fresh(const ModelConfig& config);

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Throws ContractError unless masks cover exactly the prunable set.
  void check_masks() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Pruning stage implied by a provenance list: "finetuning",
// "domain_pretraining", "general_pretraining" or "none". Throws DataError on
// a lineage that prunes more than once or has unknown entries.
std::string pruning_stage(const std::vector<std::string>& provenance);

// True when domain pretraining appears in the lineage.
bool domain_pretrained(const std::vector<std::string>& provenance);

}  // namespace sparsify

#endif  // SPARSIFY_CHECKPOINT_HPP_
