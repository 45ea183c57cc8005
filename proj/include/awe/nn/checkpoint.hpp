// awe/nn/checkpoint.hpp

// Copyright 2026  awelab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "awe/nn/parameters.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace awe::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: 4-byte magic, u32 version, four u32 dims, then blocks of
/// (u32 name length, UTF-8 name, u64 element count, float64 values), all
/// little-endian. Shapes are implied by the dims and resolved by the reader.
struct CheckpointBlock {
  std::string name;
  std::vector<double> values;
};

struct Checkpoint {
  std::array<char, 4> magic{'A', 'W', 'E', 'M'};
  std::uint32_t version = kCheckpointVersion;
  std::array<std::uint32_t, 4> dims{};  // L, N, E, D for recurrent models
  std::vector<CheckpointBlock> blocks;

  const CheckpointBlock* find(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws DataError on a bad magic, version or truncated block.
Checkpoint read_checkpoint(const std::filesystem::path& path,
                           const std::array<char, 4>& expected_magic);

/// Appends every tensor of `params` as a block (column-major values).
void append_blocks(Checkpoint& ckpt, const ParameterSet& params);
/// Fills each tensor of `params` from the block of the same name; element
/// counts must match. Throws DataError on a missing or mis-sized block.
void load_blocks(const Checkpoint& ckpt, ParameterSet& params);

}  // namespace awe::nn
