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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "spanlm/adamw.hpp"
#include "spanlm/corruptor.hpp"
#include "spanlm/model.hpp"

namespace spanlm {

enum class Scheme { kTwoTower, kPipeline, kMlmBaseline };

std::string_view scheme_name(Scheme s);  // "two_tower" | "pipeline" | "mlm_baseline"
Scheme parse_scheme(std::string_view name);

// How the pipeline generator fills masked positions.
enum class GenDecode {
  kSample,    // draw from the softmax at temperature 1
  kArgmax,    // most likely non-special token
  kOriginal,  // teacher forcing: the original token (debugging)
};

std::string_view gen_decode_name(GenDecode d);  // "sample" | "argmax" | "original"
GenDecode parse_gen_decode(std::string_view name);

// Flat key/value mirror of every training knob. Keys in the file use the
// member names below; optimizer keys are lr, beta1, beta2, adam_eps,
// weight_decay, non_finite ("abort" | "skip"); encoder keys are layers,
// hidden, heads, ffn_dim, max_len, dropout. The encoder vocab size always
// comes from the vocabulary file.
struct TrainConfig {
  Scheme scheme = Scheme::kPipeline;
  double lambda = 25.0;
  bool share_params = true;
  bool no_k_replace = false;
  bool no_gen = false;
  bool no_disc = false;
  std::size_t epochs = 5;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  double mask_ratio = 0.15;
  double replace_ratio = 0.15;
  double span_choice_prob = 0.5;
  GenDecode gen_decode = GenDecode::kSample;
  AdamWConfig optimizer;
  EncoderConfig encoder;

  // Inputs and outputs, resolved relative to the config file.
  std::string annotated;
  std::string vocab;
  std::string output_dir;
  bool keep_epoch_checkpoints = false;

  MaskConfig mask_config() const { return {mask_ratio, span_choice_prob, seed}; }
  MaskConfig replace_config() const { return {replace_ratio, span_choice_prob, seed}; }

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  // Unknown keys and wrongly typed values throw std::invalid_argument.
  static TrainConfig from_json(const nlohmann::json& j);
};

// Reads a flat config file into a JSON object. Accepts either a JSON
// object or "key = value" lines (# comments, blank lines ignored) whose
// values parse as JSON scalars or else are taken as bare strings. Throws
// DataError with the line number on malformed input.
nlohmann::json read_flat_config(const std::filesystem::path& path);

// read_flat_config + TrainConfig::from_json; relative annotated / vocab /
// output_dir paths are resolved against the config file's directory.
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace spanlm
