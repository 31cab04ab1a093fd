// Copyright 2026 The spanlm Authors.
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "spanlm/tensor.hpp"

namespace spanlm {

// On-disk layout:
//   "KGPLM" 0x01                      magic and format version
//   u64 little-endian                 header length in bytes
//   header                            UTF-8 JSON, see below
//   payload                           float32 little-endian tensors
// The header holds "config", "vocab", "state" (epoch, step,
// optimizer_steps, seed, best_loss), "tensors" (name, shape, offset and
// count in floats) and "checksum", the FNV-1a 64-bit hash of the payload
// as 16 hex digits.
struct Checkpoint {
  nlohmann::ordered_json config;
  nlohmann::json vocab;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
  std::int64_t epoch = 0;  // completed epochs
  std::int64_t step = 0;   // completed optimizer steps
  std::int64_t optimizer_steps = 0;
  std::uint64_t seed = 0;
  double best_loss = 0.0;
  bool has_best_loss = false;

  const Tensor<float>* find(const std::string& name) const;
};

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);

// Writes atomically through a temporary sibling file.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Throws DataError on a bad magic, unsupported version, truncation or a
// checksum mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spanlm
