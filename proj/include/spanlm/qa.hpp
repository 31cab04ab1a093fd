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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spanlm/model.hpp"
#include "spanlm/text.hpp"
#include "spanlm/tokenizer.hpp"

namespace spanlm {

struct QaItem {
  std::string id;
  std::string question;
  std::string context;
  std::vector<std::string> answers;
};

// QA JSONL: {"id": str, "question": str, "context": str, "answers": [str]}.
// Throws DataError naming the line of the first malformed record.
std::vector<QaItem> load_qa(const std::filesystem::path& path);

// CLS question SEP context SEP, with gold token indices of the first
// answer (in list order) whose bytes occur in the context; the earliest
// occurrence is used.
struct QaExample {
  std::vector<TokenId> ids;
  std::size_t context_begin = 0;  // first context token index in ids
  std::size_t context_end = 0;    // one past the last
  std::vector<ByteRange> context_offsets;  // per context token, into context
  std::optional<std::size_t> gold_start;
  std::optional<std::size_t> gold_end;
};

// Throws std::invalid_argument when the encoded example exceeds max_len.
QaExample build_qa_example(const QaItem& item, const Vocabulary& vocab, std::size_t max_len);

// Fine-tuning knobs; flat config keys use the member names.
struct QaConfig {
  std::size_t epochs = 4;
  std::size_t batch_size = 16;
  double lr = 3e-5;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  std::size_t max_answer_tokens = 30;

  static QaConfig from_json(const nlohmann::json& j);
};

QaConfig load_qa_config(const std::filesystem::path& path);

struct QaSpan {
  std::size_t start = 0;  // token indices into QaExample::ids, inclusive
  std::size_t end = 0;
  std::string text;
};

// argmax of start + end logits over context tokens with start <= end and
// end - start < max_answer_tokens.
template <typename T>
QaSpan predict_span(const Model<T>& model, const QaExample& example, const std::string& context,
                    std::size_t max_answer_tokens);

struct FinetuneReport {
  std::vector<double> epoch_loss;
  std::size_t skipped = 0;  // items whose answer is absent from the context
};

// Start/end cross-entropy over all positions, averaged over the two ends
// and the batch. Example order per epoch is shuffled with
// Rng(epoch_seed(seed ^ kShuffleStream, epoch, 1)). `warn` receives one
// message per skipped item.
template <typename T>
FinetuneReport finetune_qa(Model<T>& model, std::span<const QaItem> items, const Vocabulary& vocab,
                           const QaConfig& config, const std::function<void(const std::string&)>& warn = {});

template <typename T>
std::vector<std::string> predict_answers(const Model<T>& model, std::span<const QaItem> items,
                                         const Vocabulary& vocab, std::size_t max_answer_tokens);

}  // namespace spanlm
