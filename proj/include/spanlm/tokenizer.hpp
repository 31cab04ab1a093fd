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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "spanlm/text.hpp"

namespace spanlm {

using TokenId = std::int32_t;

// Fixed layout: specials first, then the 256 byte tokens, then merges.
struct Specials {
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kCls = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kMask = 3;
  static constexpr TokenId kUnk = 4;
  static constexpr TokenId kCount = 5;
};

inline constexpr TokenId kFirstByteToken = Specials::kCount;
inline constexpr TokenId kFirstMergeToken = kFirstByteToken + 256;

struct Encoding {
  std::vector<TokenId> ids;
  std::vector<ByteRange> offsets;  // one per id, into the encoded text
};

// Half-open token index range.
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

// Byte-level BPE vocabulary. Immutable after construction; all methods are
// const and safe to call concurrently.
class Vocabulary {
 public:
  using Merge = std::pair<std::string, std::string>;  // raw bytes

  // Replays merges in rank order; ids are assigned densely from
  // kFirstMergeToken to every merge result not seen before.
  static Vocabulary from_merges(std::vector<Merge> merges);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<Merge>& merges() const { return merges_; }

  static bool is_special(TokenId id) { return id >= 0 && id < Specials::kCount; }

  // Raw bytes of a token; specials yield their bracketed marker, e.g.
  // "[MASK]".
  const std::string& token_bytes(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::optional<TokenId> find(std::string_view bytes) const;

  Encoding encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<TokenId, TokenId>& p) const {
      return std::hash<std::uint64_t>()((static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.first)) << 32) |
                                        static_cast<std::uint32_t>(p.second));
    }
  };
  struct MergeResult {
    std::size_t rank;
    TokenId token;
  };

  void encode_chunk(std::string_view chunk, std::size_t base, Encoding& out) const;

  std::vector<Merge> merges_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;  // non-special tokens only
  std::unordered_map<std::pair<TokenId, TokenId>, MergeResult, PairHash> merge_table_;
};

// Splits text into pre-tokenization chunks (merges never cross chunks): an
// optional single leading space followed by a run of letters, a run of
// digits or a run of other symbols; whitespace runs form their own chunks,
// leaving a final space to prefix the next word.
std::vector<ByteRange> pretokenize(std::string_view text);

struct BpeTrainOptions {
  std::size_t vocab_size = 4000;
  // Pairs seen fewer times than this are never merged.
  std::size_t min_pair_count = 2;
};

// Greedy BPE: repeatedly merges the most frequent adjacent pair, ties broken
// by the lexicographically smallest (left bytes, right bytes). Stops at
// vocab_size tokens or when no pair reaches min_pair_count.
// Throws std::invalid_argument on an empty corpus or a vocab_size that does
// not exceed the 256 byte tokens plus specials.
Vocabulary train_bpe(std::span<const std::string> corpus, const BpeTrainOptions& options);

struct AlignedSpan {
  std::size_t span_index;  // index into the input span list
  TokenRange tokens;
};

// Maps each byte span to the minimal covering token range, expanding
// outward over partially covered tokens. A range overlapping an earlier
// emitted range is dropped. Throws std::out_of_range for a span that is
// empty or extends past the encoded text.
std::vector<AlignedSpan> align_spans(const Encoding& encoding, std::span<const ByteRange> spans);

// GPT-2 style printable rendering of raw bytes, used for vocabulary files.
std::string bytes_to_printable(std::string_view bytes);
std::string printable_to_bytes(std::string_view printable);

}  // namespace spanlm
