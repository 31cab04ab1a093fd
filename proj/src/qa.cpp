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

#include "spanlm/qa.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "spanlm/adamw.hpp"
#include "spanlm/error.hpp"
#include "spanlm/ops.hpp"
#include "spanlm/rng.hpp"
#include "spanlm/train_config.hpp"

namespace spanlm {

std::vector<QaItem> load_qa(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open QA file " + path.string());
  std::vector<QaItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      QaItem item;
      item.id = j.at("id").get<std::string>();
      item.question = j.at("question").get<std::string>();
      item.context = j.at("context").get<std::string>();
      item.answers = j.at("answers").get<std::vector<std::string>>();
      if (item.context.empty()) throw std::invalid_argument("empty context");
      if (item.answers.empty()) throw std::invalid_argument("no answers");
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string(), line_no, std::string("malformed QA record: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw DataError(path.string(), line_no, e.what());
    }
  }
  return items;
}

QaExample build_qa_example(const QaItem& item, const Vocabulary& vocab, std::size_t max_len) {
  const Encoding q = vocab.encode(item.question);
  const Encoding c = vocab.encode(item.context);
  QaExample ex;
  ex.ids.push_back(Specials::kCls);
  ex.ids.insert(ex.ids.end(), q.ids.begin(), q.ids.end());
  ex.ids.push_back(Specials::kSep);
  ex.context_begin = ex.ids.size();
  ex.ids.insert(ex.ids.end(), c.ids.begin(), c.ids.end());
  ex.context_end = ex.ids.size();
  ex.ids.push_back(Specials::kSep);
  ex.context_offsets = c.offsets;
  if (ex.ids.size() > max_len) {
    throw std::invalid_argument("QA item '" + item.id + "' needs " + std::to_string(ex.ids.size()) +
                                " tokens, above max_len " + std::to_string(max_len));
  }
  for (const std::string& answer : item.answers) {
    if (answer.empty()) continue;
    const auto pos = item.context.find(answer);
    if (pos == std::string::npos) continue;
    const ByteRange r{pos, pos + answer.size()};
    for (std::size_t i = 0; i < c.offsets.size(); ++i) {
      if (!c.offsets[i].overlaps(r)) continue;
      if (!ex.gold_start) ex.gold_start = ex.context_begin + i;
      ex.gold_end = ex.context_begin + i;
    }
    break;
  }
  return ex;
}

QaConfig QaConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("QA config must be a key/value object");
  QaConfig c;
  auto count = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw std::invalid_argument("config key '" + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  };
  auto number = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw std::invalid_argument("config key '" + key + "' must be a number");
    return v.get<double>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "epochs") c.epochs = count(v, key);
    else if (key == "batch_size") c.batch_size = count(v, key);
    else if (key == "lr") c.lr = number(v, key);
    else if (key == "weight_decay") c.weight_decay = number(v, key);
    else if (key == "seed") c.seed = count(v, key);
    else if (key == "max_answer_tokens") c.max_answer_tokens = count(v, key);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  if (c.epochs == 0 || c.batch_size == 0 || c.max_answer_tokens == 0) {
    throw std::invalid_argument("epochs, batch_size and max_answer_tokens must be >= 1");
  }
  if (!(c.lr > 0.0) || !(c.weight_decay >= 0.0)) throw std::invalid_argument("lr must be > 0 and weight_decay >= 0");
  return c;
}

QaConfig load_qa_config(const std::filesystem::path& path) {
  try {
    return QaConfig::from_json(read_flat_config(path));
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

template <typename T>
QaSpan predict_span(const Model<T>& model, const QaExample& example, const std::string& context,
                    std::size_t max_answer_tokens) {
  if (example.context_begin >= example.context_end) throw std::invalid_argument("QA example has an empty context");
  Tape<T> tape;
  Var<T> h = encode(tape, *model.disc_encoder, model.config, example.ids);
  auto [s, e] = qa_logits(tape, model, h);
  const Tensor<T>& sv = s.value();
  const Tensor<T>& ev = e.value();
  QaSpan best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = example.context_begin; i < example.context_end; ++i) {
    const std::size_t stop = std::min(example.context_end, i + max_answer_tokens);
    for (std::size_t k = i; k < stop; ++k) {
      const double score = static_cast<double>(sv[i]) + static_cast<double>(ev[k]);
      if (score > best_score) {
        best_score = score;
        best.start = i;
        best.end = k;
      }
    }
  }
  const ByteRange a = example.context_offsets[best.start - example.context_begin];
  const ByteRange b = example.context_offsets[best.end - example.context_begin];
  best.text = context.substr(a.begin, b.end - a.begin);
  const auto first = best.text.find_first_not_of(' ');
  best.text = first == std::string::npos ? std::string() : best.text.substr(first);
  return best;
}

template <typename T>
FinetuneReport finetune_qa(Model<T>& model, std::span<const QaItem> items, const Vocabulary& vocab,
                           const QaConfig& config, const std::function<void(const std::string&)>& warn) {
  FinetuneReport report;
  std::vector<QaExample> examples;
  for (const QaItem& item : items) {
    QaExample ex = build_qa_example(item, vocab, model.config.max_len);
    if (!ex.gold_start) {
      ++report.skipped;
      if (warn) warn("answer not found in context for item '" + item.id + "'; skipped");
      continue;
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw DataError("no QA item has its answer in the context");

  AdamWConfig opt;
  opt.lr = config.lr;
  opt.weight_decay = config.weight_decay;
  AdamW<T> optimizer(opt, model.parameters());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(epoch_seed(config.seed ^ kShuffleStream, epoch, 1));
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);

    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t stop = std::min(order.size(), b + config.batch_size);
      const T w = T(0.5) / static_cast<T>(stop - b);
      Tape<T> tape;
      Var<T> loss;
      for (std::size_t k = b; k < stop; ++k) {
        const QaExample& ex = examples[order[k]];
        Var<T> h = encode(tape, *model.disc_encoder, model.config, ex.ids,
                          ForwardOptions{true, epoch_seed(config.seed ^ kDropoutStream, epoch, order[k])});
        auto [s, e] = qa_logits(tape, model, h);
        const TokenId gs = static_cast<TokenId>(*ex.gold_start);
        const TokenId ge = static_cast<TokenId>(*ex.gold_end);
        const T weights[1] = {w};
        Var<T> l = ops::add(ops::cross_entropy_with_logits(ops::transpose(s), std::span<const TokenId>(&gs, 1),
                                                           std::span<const T>(weights)),
                            ops::cross_entropy_with_logits(ops::transpose(e), std::span<const TokenId>(&ge, 1),
                                                           std::span<const T>(weights)));
        loss = loss.valid() ? ops::add(loss, l) : l;
      }
      const double value = static_cast<double>(loss.value().item());
      if (!std::isfinite(value)) throw NumericError(optimizer.steps() + 1, "non-finite QA loss");
      tape.backward(loss);
      optimizer.step();
      epoch_loss += value;
      ++steps;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(steps));
  }
  return report;
}

template <typename T>
std::vector<std::string> predict_answers(const Model<T>& model, std::span<const QaItem> items,
                                         const Vocabulary& vocab, std::size_t max_answer_tokens) {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const QaItem& item : items) {
    const QaExample ex = build_qa_example(item, vocab, model.config.max_len);
    out.push_back(predict_span(model, ex, item.context, max_answer_tokens).text);
  }
  return out;
}

#define SPANLM_INSTANTIATE_QA(T)                                                                                   \
  template QaSpan predict_span(const Model<T>&, const QaExample&, const std::string&, std::size_t);                 \
  template FinetuneReport finetune_qa(Model<T>&, std::span<const QaItem>, const Vocabulary&, const QaConfig&,       \
                                      const std::function<void(const std::string&)>&);                              \
  template std::vector<std::string> predict_answers(const Model<T>&, std::span<const QaItem>, const Vocabulary&,    \
                                                    std::size_t);

SPANLM_INSTANTIATE_QA(float)
SPANLM_INSTANTIATE_QA(double)
#undef SPANLM_INSTANTIATE_QA

}  // namespace spanlm
