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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "spanlm/model.hpp"
#include "spanlm/tokenizer.hpp"

namespace spanlm {

inline constexpr std::string_view kSlotMarker = "[MASK_SLOT]";

struct ClozeItem {
  std::string relation;
  std::string sentence;  // contains kSlotMarker exactly once
  std::string answer;
};

// Throws std::invalid_argument unless the item carries exactly one marker,
// a non-empty answer and a relation.
void validate_cloze(const ClozeItem& item);

// Cloze JSONL: {"relation": str, "sentence": str, "answer": str}. Throws
// DataError naming the line of the first invalid record.
std::vector<ClozeItem> load_cloze(const std::filesystem::path& path);

using StopWords = std::unordered_set<std::string>;

// One word per line; surrounding whitespace trimmed, lowercased, blank lines
// skipped.
StopWords load_stopwords(const std::filesystem::path& path);

struct ClozePrediction {
  std::string relation;
  std::string answer;
  std::vector<TokenId> gold_ids;
  std::vector<TokenId> predicted_ids;
  std::vector<std::uint8_t> position_correct;
  std::string predicted;
  bool correct = false;
};

// Ids that predict_cloze may rank: non-special tokens whose text, trimmed
// and lowercased, is not a stop word.
std::vector<std::uint8_t> ranking_mask(const Vocabulary& vocab, const StopWords& stopwords);

// Fills the slot with the gold answer, replaces the k tokens overlapping
// the answer bytes by MASK and takes, in one generator forward pass, the
// top-ranked allowed token at each of them. Throws std::invalid_argument
// when the sentence exceeds max_len.
template <typename T>
ClozePrediction predict_cloze(const ClozeItem& item, const Model<T>& model, const Vocabulary& vocab,
                              std::span<const std::uint8_t> allowed);

struct RelationScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double p_at_1 = 0.0;
};

struct ProbeReport {
  std::map<std::string, RelationScore> per_relation;
  double macro_p_at_1 = 0.0;  // unweighted mean over relations with items
  RelationScore single_subword;
  RelationScore multi_subword;
};

ProbeReport p_at_1(std::span<const ClozePrediction> predictions);

nlohmann::ordered_json report_to_json(const ProbeReport& report);

// SQuAD answer normalization: lowercase, drop punctuation and the articles
// a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);

// Token-overlap F1 between normalized strings.
double token_f1(std::string_view prediction, std::string_view gold);

struct QaScores {
  double exact_match = 0.0;  // fraction in [0, 1]
  double f1 = 0.0;
  std::size_t count = 0;
};

// Per item the maximum over its gold answers, then averaged. Throws
// std::invalid_argument when the lists differ in length or an item has no
// gold answer.
QaScores qa_metrics(std::span<const std::string> predictions, std::span<const std::vector<std::string>> golds);

}  // namespace spanlm
