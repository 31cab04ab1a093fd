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

#include "spanlm/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "spanlm/error.hpp"

namespace spanlm {

void validate_cloze(const ClozeItem& item) {
  if (item.relation.empty()) throw std::invalid_argument("empty relation");
  if (item.answer.empty()) throw std::invalid_argument("empty answer");
  const auto first = item.sentence.find(kSlotMarker);
  if (first == std::string::npos) throw std::invalid_argument("sentence lacks the [MASK_SLOT] marker");
  if (item.sentence.find(kSlotMarker, first + 1) != std::string::npos) {
    throw std::invalid_argument("sentence has more than one [MASK_SLOT] marker");
  }
}

std::vector<ClozeItem> load_cloze(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cloze file " + path.string());
  std::vector<ClozeItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClozeItem item;
      item.relation = j.at("relation").get<std::string>();
      item.sentence = j.at("sentence").get<std::string>();
      item.answer = j.at("answer").get<std::string>();
      validate_cloze(item);
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string(), line_no, std::string("malformed cloze record: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw DataError(path.string(), line_no, e.what());
    }
  }
  return items;
}

namespace {

std::string trim_lower(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

StopWords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open stop-word file " + path.string());
  StopWords words;
  std::string line;
  while (std::getline(in, line)) {
    std::string w = trim_lower(line);
    if (!w.empty()) words.insert(std::move(w));
  }
  return words;
}

std::vector<std::uint8_t> ranking_mask(const Vocabulary& vocab, const StopWords& stopwords) {
  std::vector<std::uint8_t> allowed(vocab.size(), 0);
  for (std::size_t id = Specials::kCount; id < vocab.size(); ++id) {
    allowed[id] = stopwords.contains(trim_lower(vocab.token_bytes(static_cast<TokenId>(id)))) ? 0 : 1;
  }
  return allowed;
}

template <typename T>
ClozePrediction predict_cloze(const ClozeItem& item, const Model<T>& model, const Vocabulary& vocab,
                              std::span<const std::uint8_t> allowed) {
  validate_cloze(item);
  if (allowed.size() != vocab.size()) throw std::invalid_argument("ranking mask does not match the vocabulary");
  const std::size_t slot = item.sentence.find(kSlotMarker);
  const std::string text = item.sentence.substr(0, slot) + item.answer + item.sentence.substr(slot + kSlotMarker.size());
  const ByteRange answer{slot, slot + item.answer.size()};
  const Encoding enc = vocab.encode(text);

  ClozePrediction pred;
  pred.relation = item.relation;
  pred.answer = item.answer;
  std::vector<TokenId> ids{Specials::kCls};
  std::vector<std::int32_t> rows;
  for (std::size_t i = 0; i < enc.ids.size(); ++i) {
    if (enc.offsets[i].overlaps(answer)) {
      pred.gold_ids.push_back(enc.ids[i]);
      rows.push_back(static_cast<std::int32_t>(ids.size()));
      ids.push_back(Specials::kMask);
    } else {
      ids.push_back(enc.ids[i]);
    }
  }
  ids.push_back(Specials::kSep);
  if (ids.size() > model.config.max_len) throw std::invalid_argument("cloze sentence exceeds max_len");

  Tape<T> tape;
  Var<T> h = encode(tape, *model.gen_encoder, model.config, ids);
  const Tensor<T>& logits = mlm_logits(tape, model, gather_rows(h, rows)).value();
  const std::size_t vocab_size = logits.cols();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t best = vocab_size;
    for (std::size_t v = 0; v < vocab_size; ++v) {
      if (!allowed[v]) continue;
      if (best == vocab_size || logits.at(r, v) > logits.at(r, best)) best = v;
    }
    if (best == vocab_size) throw std::invalid_argument("ranking vocabulary is empty");
    pred.predicted_ids.push_back(static_cast<TokenId>(best));
    pred.position_correct.push_back(static_cast<TokenId>(best) == pred.gold_ids[r] ? 1 : 0);
  }
  pred.predicted = vocab.decode(pred.predicted_ids);
  pred.correct = std::all_of(pred.position_correct.begin(), pred.position_correct.end(), [](auto c) { return c != 0; });
  return pred;
}

ProbeReport p_at_1(std::span<const ClozePrediction> predictions) {
  ProbeReport r;
  auto add = [](RelationScore& s, bool correct) {
    ++s.total;
    s.correct += correct ? 1 : 0;
  };
  for (const ClozePrediction& p : predictions) {
    if (p.relation.empty()) throw std::invalid_argument("prediction without a relation tag");
    add(r.per_relation[p.relation], p.correct);
    add(p.gold_ids.size() > 1 ? r.multi_subword : r.single_subword, p.correct);
  }
  auto finish = [](RelationScore& s) {
    s.p_at_1 = s.total ? static_cast<double>(s.correct) / static_cast<double>(s.total) : 0.0;
  };
  double sum = 0.0;
  for (auto& [name, s] : r.per_relation) {
    finish(s);
    sum += s.p_at_1;
  }
  finish(r.single_subword);
  finish(r.multi_subword);
  r.macro_p_at_1 = r.per_relation.empty() ? 0.0 : sum / static_cast<double>(r.per_relation.size());
  return r;
}

nlohmann::ordered_json report_to_json(const ProbeReport& report) {
  auto score = [](const RelationScore& s) {
    nlohmann::ordered_json j;
    j["p_at_1"] = s.p_at_1;
    j["correct"] = s.correct;
    j["total"] = s.total;
    return j;
  };
  nlohmann::ordered_json j;
  j["macro_p_at_1"] = report.macro_p_at_1;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [name, s] : report.per_relation) per[name] = score(s);
  j["per_relation"] = std::move(per);
  j["single_subword"] = score(report.single_subword);
  j["multi_subword"] = score(report.multi_subword);
  return j;
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::string lowered;
  lowered.reserve(s.size());
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::ispunct(u)) continue;
    lowered.push_back(static_cast<char>(std::tolower(u)));
  }
  std::string out;
  for (const std::string& w : split_words(lowered)) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

double token_f1(std::string_view prediction, std::string_view gold) {
  const auto p = split_words(normalize_answer(prediction));
  const auto g = split_words(normalize_answer(gold));
  if (p.empty() || g.empty()) return p == g ? 1.0 : 0.0;
  std::map<std::string, std::size_t> counts;
  for (const auto& w : g) ++counts[w];
  std::size_t common = 0;
  for (const auto& w : p) {
    auto it = counts.find(w);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

QaScores qa_metrics(std::span<const std::string> predictions, std::span<const std::vector<std::string>> golds) {
  if (predictions.size() != golds.size()) {
    throw std::invalid_argument("qa_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(golds.size()) + " gold items");
  }
  QaScores s;
  s.count = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (golds[i].empty()) throw std::invalid_argument("qa_metrics: item without gold answers");
    double em = 0.0, f1 = 0.0;
    const std::string norm = normalize_answer(predictions[i]);
    for (const std::string& g : golds[i]) {
      em = std::max(em, norm == normalize_answer(g) ? 1.0 : 0.0);
      f1 = std::max(f1, token_f1(predictions[i], g));
    }
    s.exact_match += em;
    s.f1 += f1;
  }
  if (s.count) {
    s.exact_match /= static_cast<double>(s.count);
    s.f1 /= static_cast<double>(s.count);
  }
  return s;
}

template ClozePrediction predict_cloze(const ClozeItem&, const Model<float>&, const Vocabulary&,
                                       std::span<const std::uint8_t>);
template ClozePrediction predict_cloze(const ClozeItem&, const Model<double>&, const Vocabulary&,
                                       std::span<const std::uint8_t>);

}  // namespace spanlm
