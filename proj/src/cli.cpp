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

#include "spanlm/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "spanlm/checkpoint.hpp"
#include "spanlm/corruptor.hpp"
#include "spanlm/error.hpp"
#include "spanlm/evaluator.hpp"
#include "spanlm/qa.hpp"
#include "spanlm/tokenizer.hpp"
#include "spanlm/train_config.hpp"
#include "spanlm/trainer.hpp"
#include "spanlm/wiki_corpus.hpp"

namespace spanlm {
namespace {

// key=value log line. Values containing spaces or quotes are JSON-quoted.
class LogLine {
 public:
  LogLine(std::ostream& os, std::string_view event) : os_(os) { os_ << "event=" << event; }
  ~LogLine() { os_ << '\n'; }

  template <typename V>
  LogLine& kv(std::string_view key, const V& value) {
    std::ostringstream s;
    if constexpr (std::is_floating_point_v<V>) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6g", static_cast<double>(value));
      s << buf;
    } else {
      s << value;
    }
    std::string v = s.str();
    if (v.empty() || v.find_first_of(" \t\"=") != std::string::npos) v = nlohmann::json(v).dump();
    os_ << ' ' << key << '=' << v;
    return *this;
  }

 private:
  std::ostream& os_;
};

// Decoded subwords may end inside a multi-byte character; such bytes are
// written as U+FFFD instead of failing the whole report.
std::string dump_lossy(const nlohmann::ordered_json& j, int indent = -1) {
  return j.dump(indent, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

void close_output(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw DataError("write failed for " + path);
}

std::vector<std::string> read_corpus_texts(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path);
  std::vector<std::string> texts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '{') {
      try {
        texts.push_back(nlohmann::json::parse(line).at("text").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw DataError(path, line_no, std::string("expected a record with a \"text\" field: ") + e.what());
      }
    } else {
      if (!is_valid_utf8(line)) throw DataError(path, line_no, "invalid UTF-8");
      texts.push_back(line);
    }
  }
  return texts;
}

struct LoadedModel {
  Checkpoint ckpt;
  Vocabulary vocab;
  Model<float> model;
};

LoadedModel load_model(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  Vocabulary vocab = Vocabulary::from_json(ckpt.vocab);
  Model<float> model = model_from_checkpoint(ckpt);
  return {std::move(ckpt), std::move(vocab), std::move(model)};
}

}  // namespace

int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-span corpus tools, masked-span / replaced-span pre-training and evaluation.", "spanlm"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  bool deterministic = false;
  app.add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", deterministic, "Force single-threaded, bit-reproducible execution");
  const char* exit_codes = "Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.";
  app.footer(exit_codes);

  // extract-spans
  std::string dump_path, alias_path, spans_out;
  bool strict = false, no_two_hop = false, no_aliases = false;
  auto* extract = app.add_subcommand("extract-spans", "Annotate a JSONL dump with knowledge spans");
  extract->add_option("--dump", dump_path, "Input article JSONL")->required();
  extract->add_option("--aliases", alias_path, "Alias table JSONL");
  extract->add_option("--out", spans_out, "Output annotated JSONL")->required();
  extract->add_flag("--strict", strict, "Fail on the first malformed dump line");
  extract->add_flag("--no-two-hop", no_two_hop, "Skip anchors of linked articles");
  extract->add_flag("--no-aliases", no_aliases, "Skip alias expansion");
  extract->footer(exit_codes);

  // corpus-stats
  std::string stats_in, stats_out;
  auto* stats = app.add_subcommand("corpus-stats", "Span statistics of an annotated corpus");
  stats->add_option("--in", stats_in, "Annotated JSONL")->required();
  stats->add_option("--out", stats_out, "Write the JSON summary here instead of stdout");
  stats->footer(exit_codes);

  // train-tokenizer
  std::string tok_corpus, tok_out;
  std::size_t vocab_size = 4000, min_pair_count = 2;
  auto* tok = app.add_subcommand("train-tokenizer", "Train a byte-level BPE vocabulary");
  tok->add_option("--corpus", tok_corpus, "Plain text lines or JSONL records with a \"text\" field")->required();
  tok->add_option("--vocab-size", vocab_size, "Target vocabulary size")->required();
  tok->add_option("--min-pair-count", min_pair_count, "Smallest pair frequency worth merging");
  tok->add_option("--out", tok_out, "Output vocabulary JSON")->required();
  tok->footer(exit_codes);

  // corrupt
  std::string cor_annotated, cor_vocab, cor_mode, cor_out;
  std::uint64_t cor_epoch = 0, cor_seed = 0;
  std::size_t cor_max_len = 128;
  double cor_ratio = 0.15, cor_span_prob = 0.5;
  auto* corrupt = app.add_subcommand("corrupt", "Emit K-MASK or K-Replace examples for inspection");
  corrupt->add_option("--annotated", cor_annotated, "Annotated JSONL")->required();
  corrupt->add_option("--vocab", cor_vocab, "Vocabulary JSON")->required();
  corrupt->add_option("--mode", cor_mode, "mask or replace")->required()->check(CLI::IsMember({"mask", "replace"}));
  corrupt->add_option("--epoch", cor_epoch, "Epoch index");
  corrupt->add_option("--seed", cor_seed, "Base seed");
  corrupt->add_option("--max-len", cor_max_len, "Sequence window");
  corrupt->add_option("--ratio", cor_ratio, "Corruption ratio");
  corrupt->add_option("--span-choice-prob", cor_span_prob, "Probability of drawing a span");
  corrupt->add_option("--out", cor_out, "Output JSONL")->required();
  corrupt->footer(exit_codes);

  // pretrain
  std::string pre_config, pre_resume, pre_scheme, pre_output, pre_decode;
  std::optional<double> pre_lambda;
  std::optional<std::size_t> pre_epochs;
  std::optional<std::uint64_t> pre_seed;
  bool pre_no_kr = false, pre_no_gen = false, pre_no_disc = false, pre_no_share = false;
  auto* pretrain = app.add_subcommand("pretrain", "Knowledge-guided pre-training");
  pretrain->add_option("--config", pre_config, "Flat key/value or JSON config")->required();
  pretrain->add_option("--resume", pre_resume, "Continue from this checkpoint");
  pretrain->add_option("--scheme", pre_scheme, "two_tower, pipeline or mlm_baseline");
  pretrain->add_option("--lambda", pre_lambda, "Weight of the discriminative loss");
  pretrain->add_option("--epochs", pre_epochs, "Total epochs");
  pretrain->add_option("--seed", pre_seed, "Base seed");
  pretrain->add_option("--output-dir", pre_output, "Directory for loss.csv and checkpoints");
  pretrain->add_option("--gen-decode", pre_decode, "sample, argmax or original");
  pretrain->add_flag("--no-k-replace", pre_no_kr, "Disable span replacement");
  pretrain->add_flag("--no-gen", pre_no_gen, "Drop the generative term from the total loss");
  pretrain->add_flag("--no-disc", pre_no_disc, "Drop the discriminative term from the total loss");
  pretrain->add_flag("--no-share", pre_no_share, "Separate generator and discriminator encoders");
  pretrain->footer(exit_codes);

  // probe
  std::string probe_ckpt, probe_data, probe_stop, probe_out, probe_log;
  auto* probe = app.add_subcommand("probe", "Cloze P@1 of a checkpoint");
  probe->add_option("--ckpt", probe_ckpt, "Checkpoint")->required();
  probe->add_option("--data", probe_data, "Cloze JSONL")->required();
  probe->add_option("--stopwords", probe_stop, "Stop-word list")->required();
  probe->add_option("--out", probe_out, "Report JSON")->required();
  probe->add_option("--predictions", probe_log, "Per-item prediction log JSONL");
  probe->footer(exit_codes);

  // finetune-qa
  std::string ft_ckpt, ft_data, ft_config, ft_out;
  auto* finetune = app.add_subcommand("finetune-qa", "Extractive QA fine-tuning");
  finetune->add_option("--ckpt", ft_ckpt, "Pre-trained checkpoint")->required();
  finetune->add_option("--data", ft_data, "QA JSONL")->required();
  finetune->add_option("--config", ft_config, "QA config (epochs, batch_size, lr, weight_decay, seed, max_answer_tokens)");
  finetune->add_option("--out", ft_out, "Output checkpoint")->required();
  finetune->footer(exit_codes);

  // eval-qa
  std::string ev_ckpt, ev_data, ev_out;
  std::size_t ev_max_answer = 30;
  auto* evalqa = app.add_subcommand("eval-qa", "EM / F1 of a fine-tuned checkpoint");
  evalqa->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  evalqa->add_option("--data", ev_data, "QA JSONL")->required();
  evalqa->add_option("--out", ev_out, "Report JSON")->required();
  evalqa->add_option("--max-answer-tokens", ev_max_answer, "Longest predicted span");
  evalqa->footer(exit_codes);

  std::vector<const char*> cargv;
  for (const std::string& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const CLI::App* failing = &app;
    for (const CLI::App* sub : app.get_subcommands()) failing = sub;
    err << "error: " << e.what() << "\n\n" << failing->help();
    return kExitUsage;
  }
  if (deterministic) threads = 1;

  try {
    if (extract->parsed()) {
      std::vector<LineIssue> issues;
      const std::vector<Article> articles = read_dump(dump_path, strict, &issues);
      for (const LineIssue& i : issues) LogLine(err, "skip-line").kv("file", dump_path).kv("line", i.line).kv("reason", i.message);
      std::optional<AliasTable> table;
      if (!alias_path.empty()) table = read_alias_table(alias_path);
      const SpanLexicon lexicon =
          build_lexicon(articles, table ? &*table : nullptr, LexiconOptions{!no_two_hop, !no_aliases});
      std::ofstream os = open_output(spans_out);
      std::size_t spans = 0;
      for (const Article& a : articles) {
        const AnnotatedArticle ann = match_spans(a, lexicon.by_article.at(a.id));
        spans += ann.spans.size();
        os << annotated_to_jsonl(ann) << '\n';
      }
      close_output(os, spans_out);
      LogLine(err, "extract-spans").kv("articles", articles.size()).kv("spans", spans).kv("skipped", issues.size());
    } else if (stats->parsed()) {
      const auto annotated = read_annotated(stats_in);
      const CorpusStats st = corpus_stats(annotated);
      nlohmann::ordered_json j;
      j["articles"] = st.articles;
      j["spans"] = st.spans;
      j["mean_spans"] = st.mean_spans;
      j["max_spans"] = st.max_spans;
      j["spans_by_source"] = st.spans_by_source;
      if (stats_out.empty()) {
        out << j.dump(2) << '\n';
      } else {
        std::ofstream os = open_output(stats_out);
        os << j.dump(2) << '\n';
        close_output(os, stats_out);
      }
    } else if (tok->parsed()) {
      const auto texts = read_corpus_texts(tok_corpus);
      if (texts.empty()) throw DataError(tok_corpus + ": empty corpus");
      Vocabulary vocab = [&] {
        try {
          return train_bpe(texts, BpeTrainOptions{vocab_size, min_pair_count});
        } catch (const std::invalid_argument& e) {
          throw CLI::ValidationError("--vocab-size", e.what());
        }
      }();
      vocab.save(tok_out);
      LogLine(err, "train-tokenizer").kv("lines", texts.size()).kv("vocab_size", vocab.size()).kv("merges", vocab.merges().size());
    } else if (corrupt->parsed()) {
      const Vocabulary vocab = Vocabulary::load(cor_vocab);
      const auto annotated = read_annotated(cor_annotated);
      const MaskConfig cfg{cor_ratio, cor_span_prob, cor_seed};
      cfg.validate();
      const ReplacementPool pool = build_replacement_pool(annotated, vocab);
      std::ofstream os = open_output(cor_out);
      std::uint64_t example_id = 0;
      for (const AnnotatedArticle& a : annotated) {
        for (const TokenizedExample& ex : tokenize_annotated(a, vocab, cor_max_len)) {
          std::size_t non_special = 0;
          for (TokenId id : ex.ids) non_special += Vocabulary::is_special(id) ? 0 : 1;
          if (non_special < 2) continue;
          nlohmann::ordered_json j;
          j["example"] = example_id;
          if (cor_mode == "mask") {
            const GenExample g = k_mask(ex.ids, ex.spans, cfg, cor_epoch, example_id);
            j["ids"] = g.input_ids;
            j["mask_flags"] = g.mask_flags;
            j["origin_ids"] = g.target_ids;
          } else {
            ReplaceOptions ro;
            ro.max_len = cor_max_len;
            const DiscExample d = k_replace(ex.ids, ex.spans, pool, vocab, cfg, cor_epoch, example_id, ro);
            j["ids"] = d.input_ids;
            j["labels"] = d.labels;
            j["origin_ids"] = d.origin_ids;
          }
          os << j.dump() << '\n';
          ++example_id;
        }
      }
      close_output(os, cor_out);
      LogLine(err, "corrupt").kv("mode", cor_mode).kv("examples", example_id).kv("epoch", cor_epoch).kv("seed", cor_seed);
    } else if (pretrain->parsed()) {
      TrainConfig config = load_train_config(pre_config);
      try {
        if (!pre_scheme.empty()) config.scheme = parse_scheme(pre_scheme);
        if (!pre_decode.empty()) config.gen_decode = parse_gen_decode(pre_decode);
      } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError(e.what());
      }
      if (pre_lambda) config.lambda = *pre_lambda;
      if (pre_epochs) config.epochs = *pre_epochs;
      if (pre_seed) config.seed = *pre_seed;
      if (!pre_output.empty()) config.output_dir = pre_output;
      config.no_k_replace = config.no_k_replace || pre_no_kr;
      config.no_gen = config.no_gen || pre_no_gen;
      config.no_disc = config.no_disc || pre_no_disc;
      if (pre_no_share) config.share_params = false;
      try {
        config.validate();
      } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError(e.what());
      }
      LogLine(err, "pretrain-start")
          .kv("scheme", scheme_name(config.scheme))
          .kv("lambda", config.lambda)
          .kv("epochs", config.epochs)
          .kv("seed", config.seed)
          .kv("threads", threads);
      const std::optional<std::filesystem::path> resume =
          pre_resume.empty() ? std::nullopt : std::optional<std::filesystem::path>(pre_resume);
      const PretrainResult r = run_pretraining(config, resume, [&err](const EpochSummary& s) {
        LogLine(err, "epoch")
            .kv("epoch", s.epoch)
            .kv("steps", s.steps)
            .kv("loss_total", s.mean.total)
            .kv("loss_gen", s.mean.gen)
            .kv("loss_disc", s.mean.disc);
      });
      LogLine(err, "pretrain-done").kv("epochs", r.epochs.size()).kv("checkpoint", r.last_checkpoint.string());
    } else if (probe->parsed()) {
      const LoadedModel m = load_model(probe_ckpt);
      const auto items = load_cloze(probe_data);
      const StopWords stop = load_stopwords(probe_stop);
      const auto allowed = ranking_mask(m.vocab, stop);
      std::vector<ClozePrediction> preds;
      for (std::size_t i = 0; i < items.size(); ++i) {
        try {
          preds.push_back(predict_cloze(items[i], m.model, m.vocab, allowed));
        } catch (const std::invalid_argument& e) {
          throw DataError(probe_data, i + 1, e.what());
        }
      }
      const ProbeReport report = p_at_1(preds);
      std::ofstream os = open_output(probe_out);
      os << dump_lossy(report_to_json(report), 2) << '\n';
      close_output(os, probe_out);
      if (!probe_log.empty()) {
        std::ofstream log = open_output(probe_log);
        for (const ClozePrediction& p : preds) {
          nlohmann::ordered_json j;
          j["relation"] = p.relation;
          j["answer"] = p.answer;
          j["predicted"] = p.predicted;
          j["gold_ids"] = p.gold_ids;
          j["predicted_ids"] = p.predicted_ids;
          j["correct"] = p.correct;
          log << dump_lossy(j) << '\n';
        }
        close_output(log, probe_log);
      }
      LogLine(err, "probe").kv("items", preds.size()).kv("macro_p_at_1", report.macro_p_at_1);
    } else if (finetune->parsed()) {
      LoadedModel m = load_model(ft_ckpt);
      const QaConfig qc = ft_config.empty() ? QaConfig{} : load_qa_config(ft_config);
      const auto items = load_qa(ft_data);
      const FinetuneReport rep = finetune_qa(m.model, std::span<const QaItem>(items), m.vocab, qc,
                                             [&err](const std::string& w) { LogLine(err, "warning").kv("message", w); });
      for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e) {
        LogLine(err, "qa-epoch").kv("epoch", e + 1).kv("loss", rep.epoch_loss[e]);
      }
      TrainConfig tc = TrainConfig::from_json(m.ckpt.config);
      Checkpoint ck = make_checkpoint(tc, m.vocab, m.model, nullptr);
      ck.epoch = m.ckpt.epoch;
      ck.step = m.ckpt.step;
      save_checkpoint(ft_out, ck);
      LogLine(err, "finetune-qa").kv("items", items.size()).kv("skipped", rep.skipped).kv("checkpoint", ft_out);
    } else if (evalqa->parsed()) {
      const LoadedModel m = load_model(ev_ckpt);
      const auto items = load_qa(ev_data);
      const auto preds = predict_answers(m.model, std::span<const QaItem>(items), m.vocab, ev_max_answer);
      std::vector<std::vector<std::string>> golds;
      for (const QaItem& it : items) golds.push_back(it.answers);
      const QaScores s = qa_metrics(preds, golds);
      nlohmann::ordered_json j;
      j["exact_match"] = s.exact_match;
      j["f1"] = s.f1;
      j["count"] = s.count;
      auto list = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < items.size(); ++i) list.push_back({{"id", items[i].id}, {"prediction", preds[i]}});
      j["predictions"] = std::move(list);
      std::ofstream os = open_output(ev_out);
      os << dump_lossy(j, 2) << '\n';
      close_output(os, ev_out);
      LogLine(err, "eval-qa").kv("items", s.count).kv("exact_match", s.exact_match).kv("f1", s.f1);
    }
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    LogLine(err, "numeric-failure").kv("step", e.step()).kv("message", e.what());
    return kExitNumeric;
  } catch (const DataError& e) {
    LogLine(err, "data-error").kv("message", e.what());
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    LogLine(err, "data-error").kv("message", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    LogLine(err, "data-error").kv("message", e.what());
    return kExitData;
  }
  return kExitOk;
}

}  // namespace spanlm
