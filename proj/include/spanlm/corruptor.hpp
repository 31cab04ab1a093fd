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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spanlm/tokenizer.hpp"
#include "spanlm/wiki_corpus.hpp"

namespace spanlm {

struct MaskConfig {
  double mask_ratio = 0.15;
  double span_choice_prob = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Knowledge span located in a token sequence.
struct TokenSpan {
  TokenRange range;
  std::optional<std::string> type_tag;
};

// One encoder input: CLS tokens SEP, with its knowledge spans.
struct TokenizedExample {
  std::vector<TokenId> ids;
  std::vector<TokenSpan> spans;  // sorted, non-overlapping, never covering specials
};

// Encodes an annotated article into one or more examples of at most
// max_len tokens. Long texts are cut into consecutive windows; a span that
// would straddle a window boundary is dropped.
std::vector<TokenizedExample> tokenize_annotated(const AnnotatedArticle& article, const Vocabulary& vocab,
                                                 std::size_t max_len);

struct GenExample {
  std::vector<TokenId> input_ids;   // x with MASK at masked positions
  std::vector<TokenId> target_ids;  // original x
  std::vector<std::uint8_t> mask_flags;
};

struct DiscExample {
  std::vector<TokenId> input_ids;
  std::vector<std::uint8_t> labels;
  // Original token at each position; -1 inside a spliced region whose length
  // differs from the span it replaced.
  std::vector<TokenId> origin_ids;
  // Output-position ranges of replaced spans.
  std::vector<TokenRange> replaced_regions;
  // Input-position range of the span behind each replaced region.
  std::vector<TokenRange> replaced_spans;
  // Output positions drawn as random subwords, including draws that hit
  // the original token.
  std::vector<std::size_t> subword_positions;
};

// ceil(ratio * non_special) with a guard against ratios like 0.15 * 20
// landing a hair above an integer in binary floating point.
std::size_t corruption_budget(double ratio, std::size_t non_special);

// K-MASK. Draws from Rng(epoch_seed(cfg.seed ^ kMaskStream, epoch, example_id))
// until the masked count reaches corruption_budget. Every iteration draws
// u = uniform01(), then
//   u < span_choice_prob and spans remain  -> span = spans[below(#spans)]
//   else free subwords remain               -> pos = free[below(#free)]
//   else spans remain                       -> span = spans[below(#spans)]
//   else stop.
// Candidate lists are kept in ascending position order; a drawn candidate
// is removed. Free subwords are non-special tokens outside every span.
// Throws std::invalid_argument if fewer than 2 non-special tokens.
GenExample k_mask(std::span<const TokenId> ids, std::span<const TokenSpan> spans, const MaskConfig& cfg,
                  std::uint64_t epoch, std::uint64_t example_id);

struct PoolEntry {
  std::string surface;
  std::vector<TokenId> bare;    // encode(surface)
  std::vector<TokenId> spaced;  // encode(" " + surface)
};

// Same-type replacement candidates. `any` holds every distinct surface.
struct ReplacementPool {
  std::map<std::string, std::vector<PoolEntry>> typed;
  std::vector<PoolEntry> any;
};

// One entry per distinct surface per type tag, sorted by surface.
ReplacementPool build_replacement_pool(std::span<const AnnotatedArticle> annotated, const Vocabulary& vocab);

struct ReplaceOptions {
  // Only accept pool entries with the span's token length.
  bool require_equal_length = false;
  // Output length cap for length-changing splices; 0 disables the cap.
  std::size_t max_len = 0;
  // Positions flagged here are never drawn as random subwords.
  std::span<const std::uint8_t> exclude_subwords;
};

// K-Replace. Same draw loop as k_mask on
// Rng(epoch_seed(cfg.seed ^ kReplaceStream, epoch, example_id)), budget
// counted in original tokens. A drawn span picks a replacement:
//   bucket = typed[span.type_tag] if present, then `any`;
//   within a bucket, entries whose tokenization (spaced if the span's
//   first token starts with a space, else bare) differs from the original
//   tokens are candidates; those of the span's length win, otherwise all
//   fitting entries when lengths may differ; one draw below(#candidates).
// When no bucket yields a replacement the span is retired without
// consuming budget. A drawn subword becomes kFirstByteToken +
// below(|V| - kFirstByteToken), labeled 1 unless it equals the original.
// Throws std::invalid_argument when spans are given but the pool is empty.
DiscExample k_replace(std::span<const TokenId> ids, std::span<const TokenSpan> spans, const ReplacementPool& pool,
                      const Vocabulary& vocab, const MaskConfig& cfg, std::uint64_t epoch, std::uint64_t example_id,
                      const ReplaceOptions& options = {});

}  // namespace spanlm
