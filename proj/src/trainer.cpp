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

#include "spanlm/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "spanlm/error.hpp"
#include "spanlm/ops.hpp"
#include "spanlm/rng.hpp"
#include "spanlm/wiki_corpus.hpp"

namespace spanlm {

template <typename T>
Var<T> masked_token_nll(Var<T> logits, std::span<const TokenId> targets) {
  if (targets.empty()) throw std::invalid_argument("masked_token_nll: no masked positions");
  const std::vector<T> weights(targets.size(), T(1) / static_cast<T>(targets.size()));
  return ops::cross_entropy_with_logits(logits, targets, std::span<const T>(weights));
}

template <typename T>
Var<T> replaced_token_bce(Var<T> logits, std::span<const std::uint8_t> labels) {
  if (labels.empty()) throw std::invalid_argument("replaced_token_bce: no positions");
  const std::vector<T> y(labels.begin(), labels.end());
  const std::vector<T> weights(labels.size(), T(1) / static_cast<T>(labels.size()));
  return ops::binary_cross_entropy_with_logits(logits, std::span<const T>(y), std::span<const T>(weights));
}

namespace {

ForwardOptions example_options(const ForwardOptions& base, std::size_t k) {
  ForwardOptions o = base;
  o.dropout_seed = mix64(base.dropout_seed + k);
  return o;
}

template <typename T>
Var<T> accumulate(Var<T> acc, Var<T> term) {
  return acc.valid() ? ops::add(acc, term) : term;
}

}  // namespace

template <typename T>
Var<T> loss_gen(Tape<T>& tape, const Model<T>& model, std::span<const GenExample> batch, const ForwardOptions& options,
                std::vector<Tensor<T>>* masked_logits) {
  if (batch.empty()) throw std::invalid_argument("loss_gen: empty batch");
  std::size_t total = 0;
  for (const GenExample& ex : batch) {
    for (auto f : ex.mask_flags) total += f ? 1 : 0;
  }
  if (total == 0) throw std::invalid_argument("loss_gen: batch has no masked positions");
  const T w = T(1) / static_cast<T>(total);
  if (masked_logits) masked_logits->clear();

  Var<T> acc;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const GenExample& ex = batch[k];
    std::vector<std::int32_t> rows;
    std::vector<TokenId> targets;
    for (std::size_t i = 0; i < ex.mask_flags.size(); ++i) {
      if (ex.mask_flags[i]) {
        rows.push_back(static_cast<std::int32_t>(i));
        targets.push_back(ex.target_ids[i]);
      }
    }
    if (rows.empty()) {
      if (masked_logits) masked_logits->emplace_back();
      continue;
    }
    Var<T> h = encode(tape, *model.gen_encoder, model.config, ex.input_ids, example_options(options, k));
    Var<T> logits = mlm_logits(tape, model, gather_rows(h, rows));
    if (masked_logits) masked_logits->push_back(logits.value());
    const std::vector<T> weights(rows.size(), w);
    acc = accumulate(acc, ops::cross_entropy_with_logits(logits, targets, std::span<const T>(weights)));
  }
  return acc;
}

template <typename T>
Var<T> loss_disc(Tape<T>& tape, const Model<T>& model, std::span<const DiscExample> batch,
                 const ForwardOptions& options) {
  if (batch.empty()) throw std::invalid_argument("loss_disc: empty batch");
  std::size_t total = 0;
  for (const DiscExample& ex : batch) total += ex.input_ids.size();
  if (total == 0) throw std::invalid_argument("loss_disc: batch has no positions");
  const T w = T(1) / static_cast<T>(total);
  Var<T> acc;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const DiscExample& ex = batch[k];
    if (ex.labels.size() != ex.input_ids.size()) throw std::invalid_argument("loss_disc: labels/ids length mismatch");
    Var<T> h = encode(tape, *model.disc_encoder, model.config, ex.input_ids, example_options(options, k));
    const std::vector<T> y(ex.labels.begin(), ex.labels.end());
    const std::vector<T> weights(y.size(), w);
    acc = accumulate(acc, ops::binary_cross_entropy_with_logits(disc_logits(tape, model, h), std::span<const T>(y),
                                                               std::span<const T>(weights)));
  }
  return acc;
}

template <typename T>
std::vector<TokenId> fill_masked(const GenExample& gen, const Tensor<T>& masked_logits, GenDecode decode,
                                 std::uint64_t seed, std::uint64_t epoch, std::uint64_t example_id) {
  std::vector<TokenId> out = gen.input_ids;
  Rng rng(epoch_seed(seed ^ kSampleStream, epoch, example_id));
  const std::size_t vocab = masked_logits.cols();
  const auto first = static_cast<std::size_t>(kFirstByteToken);
  std::size_t row = 0;
  std::vector<double> p(vocab);
  for (std::size_t i = 0; i < gen.mask_flags.size(); ++i) {
    if (!gen.mask_flags[i]) continue;
    if (decode == GenDecode::kOriginal) {
      out[i] = gen.target_ids[i];
      ++row;
      continue;
    }
    if (row >= masked_logits.rows() || vocab <= first) throw std::invalid_argument("fill_masked: logits too small");
    const T* l = masked_logits.data() + row * vocab;
    std::size_t best = first;
    for (std::size_t v = first; v < vocab; ++v) {
      if (l[v] > l[best]) best = v;
    }
    if (decode == GenDecode::kArgmax) {
      out[i] = static_cast<TokenId>(best);
      ++row;
      continue;
    }
    double z = 0.0;
    for (std::size_t v = first; v < vocab; ++v) {
      p[v] = std::exp(static_cast<double>(l[v]) - static_cast<double>(l[best]));
      z += p[v];
    }
    const double u = rng.uniform01() * z;
    double cum = 0.0;
    std::size_t pick = vocab - 1;
    for (std::size_t v = first; v < vocab; ++v) {
      cum += p[v];
      if (cum > u) {
        pick = v;
        break;
      }
    }
    out[i] = static_cast<TokenId>(pick);
    ++row;
  }
  return out;
}

template <typename T>
Trainer<T>::Trainer(TrainConfig config, const Vocabulary& vocab, std::vector<TokenizedExample> examples,
                    ReplacementPool pool)
    : config_(std::move(config)),
      vocab_(&vocab),
      examples_(std::move(examples)),
      pool_(std::move(pool)),
      model_([&] {
        config_.encoder.vocab_size = vocab.size();
        config_.validate();
        return Model<T>::create(config_.encoder, config_.share_params, config_.seed);
      }()),
      optimizer_(config_.optimizer, model_.parameters()) {
  if (examples_.empty()) throw std::invalid_argument("trainer needs at least one example");
  for (const TokenizedExample& ex : examples_) {
    if (ex.ids.size() > config_.encoder.max_len) throw std::invalid_argument("example longer than max_len");
  }
}

template <typename T>
std::vector<std::size_t> Trainer<T>::epoch_order(std::uint64_t epoch) const {
  std::vector<std::size_t> order(examples_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(epoch_seed(config_.seed ^ kShuffleStream, epoch, 0));
  for (std::size_t i = order.size(); i-- > 1;) {
    std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
  }
  return order;
}

template <typename T>
StepLosses Trainer<T>::forward(std::span<const std::size_t> example_ids, std::uint64_t epoch, bool update) {
  if (example_ids.empty()) throw std::invalid_argument("empty batch");
  const bool baseline = config_.scheme == Scheme::kMlmBaseline;
  const MaskConfig mask_cfg = config_.mask_config();
  const MaskConfig repl_cfg = config_.replace_config();

  last_gen_.clear();
  last_disc_.clear();
  for (std::size_t id : example_ids) {
    const TokenizedExample& ex = examples_.at(id);
    const std::span<const TokenSpan> spans = baseline ? std::span<const TokenSpan>() : ex.spans;
    last_gen_.push_back(k_mask(ex.ids, spans, mask_cfg, epoch, id));
  }

  Tape<T> tape;
  const std::uint64_t dropout_base = epoch_seed(config_.seed ^ kDropoutStream, epoch, static_cast<std::uint64_t>(step_));
  const ForwardOptions gen_opts{update, mix64(dropout_base)};
  const ForwardOptions disc_opts{update, mix64(dropout_base + 1)};
  const bool pipeline = config_.scheme == Scheme::kPipeline;
  std::vector<Tensor<T>> masked_logits;
  Var<T> gen_loss = loss_gen(tape, model_, last_gen_, gen_opts, pipeline ? &masked_logits : nullptr);

  StepLosses out;
  out.gen = static_cast<double>(gen_loss.value().item());
  Var<T> total;
  if (baseline) {
    total = gen_loss;
  } else {
    for (std::size_t k = 0; k < example_ids.size(); ++k) {
      const std::size_t id = example_ids[k];
      const TokenizedExample& ex = examples_[id];
      if (!pipeline) {
        const std::span<const TokenSpan> spans = config_.no_k_replace ? std::span<const TokenSpan>() : ex.spans;
        ReplaceOptions ro;
        ro.max_len = config_.encoder.max_len;
        last_disc_.push_back(k_replace(ex.ids, spans, pool_, *vocab_, repl_cfg, epoch, id, ro));
        continue;
      }
      const GenExample& gen = last_gen_[k];
      std::vector<TokenId> recovered =
          fill_masked(gen, masked_logits[k], config_.gen_decode, config_.seed, epoch, static_cast<std::uint64_t>(id));
      DiscExample d;
      if (config_.no_k_replace) {
        d.input_ids = std::move(recovered);
      } else {
        ReplaceOptions ro;
        ro.require_equal_length = true;
        ro.exclude_subwords = gen.mask_flags;
        d = k_replace(recovered, ex.spans, pool_, *vocab_, repl_cfg, epoch, id, ro);
      }
      d.origin_ids = gen.target_ids;
      d.labels.assign(d.input_ids.size(), 0);
      for (std::size_t i = 0; i < d.input_ids.size(); ++i) d.labels[i] = d.input_ids[i] != gen.target_ids[i] ? 1 : 0;
      last_disc_.push_back(std::move(d));
    }
    Var<T> disc_loss = loss_disc(tape, model_, last_disc_, disc_opts);
    out.disc = static_cast<double>(disc_loss.value().item());
    const T lambda = static_cast<T>(config_.lambda);
    if (config_.no_gen) {
      total = ops::scale(disc_loss, lambda);
    } else if (config_.no_disc) {
      total = gen_loss;
    } else {
      total = ops::add(gen_loss, ops::scale(disc_loss, lambda));
    }
  }
  out.total = static_cast<double>(total.value().item());
  if (!std::isfinite(out.total)) throw NumericError(step_ + 1, "non-finite loss");
  if (update) {
    tape.backward(total);
    optimizer_.step();
  }
  return out;
}

template <typename T>
StepLosses Trainer<T>::step(std::span<const std::size_t> example_ids, std::uint64_t epoch) {
  return forward(example_ids, epoch, true);
}

template <typename T>
StepLosses Trainer<T>::evaluate(std::span<const std::size_t> example_ids, std::uint64_t epoch) {
  return forward(example_ids, epoch, false);
}

template <typename T>
EpochSummary Trainer<T>::run_epoch() {
  const auto epoch = static_cast<std::uint64_t>(epoch_);
  const std::vector<std::size_t> order = epoch_order(epoch);
  EpochSummary summary;
  summary.epoch = epoch_ + 1;
  for (std::size_t b = 0; b < order.size(); b += config_.batch_size) {
    const std::size_t e = std::min(order.size(), b + config_.batch_size);
    const StepLosses l = step(std::span<const std::size_t>(order).subspan(b, e - b), epoch);
    ++step_;
    curve_.push_back({step_, epoch_ + 1, l});
    summary.mean.total += l.total;
    summary.mean.gen += l.gen;
    summary.mean.disc += l.disc;
    ++summary.steps;
  }
  const auto n = static_cast<double>(summary.steps);
  summary.mean.total /= n;
  summary.mean.gen /= n;
  summary.mean.disc /= n;
  ++epoch_;
  return summary;
}

namespace {

nlohmann::ordered_json checkpoint_config(const TrainConfig& config) {
  nlohmann::ordered_json j = config.to_json();
  // Paths are run-local; leaving them out keeps checkpoints of identical
  // runs byte-identical regardless of where they were written.
  j.erase("annotated");
  j.erase("vocab");
  j.erase("output_dir");
  return j;
}

template <typename T>
Checkpoint make_checkpoint_impl(const TrainConfig& config, const Vocabulary& vocab, const Model<T>& model,
                                const AdamW<T>* optimizer) {
  Checkpoint ckpt;
  ckpt.config = checkpoint_config(config);
  ckpt.vocab = vocab.to_json();
  ckpt.seed = config.seed;
  const auto params = model.parameters();
  for (const auto& p : params) ckpt.tensors.emplace_back(p->name, p->value.template cast<float>());
  if (optimizer) {
    ckpt.optimizer_steps = optimizer->steps();
    for (std::size_t i = 0; i < params.size(); ++i) {
      ckpt.tensors.emplace_back("adam.m." + params[i]->name, optimizer->first_moments()[i].template cast<float>());
      ckpt.tensors.emplace_back("adam.v." + params[i]->name, optimizer->second_moments()[i].template cast<float>());
    }
  }
  return ckpt;
}

template <typename T>
void copy_tensor(const Checkpoint& ckpt, const std::string& name, Tensor<T>& dst) {
  const Tensor<float>* src = ckpt.find(name);
  if (!src) throw DataError("checkpoint lacks tensor '" + name + "'");
  if (src->shape() != dst.shape()) {
    throw DataError("checkpoint tensor '" + name + "' has shape " + shape_string(src->shape()) + ", expected " +
                    shape_string(dst.shape()));
  }
  dst = src->template cast<T>();
}

}  // namespace

template <typename T>
Checkpoint Trainer<T>::checkpoint(const Vocabulary& vocab) const {
  Checkpoint ckpt = make_checkpoint_impl(config_, vocab, model_, &optimizer_);
  ckpt.epoch = epoch_;
  ckpt.step = step_;
  return ckpt;
}

template <typename T>
void Trainer<T>::restore(const Checkpoint& ckpt) {
  const auto params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    copy_tensor(ckpt, params[i]->name, params[i]->value);
    copy_tensor(ckpt, "adam.m." + params[i]->name, optimizer_.first_moments()[i]);
    copy_tensor(ckpt, "adam.v." + params[i]->name, optimizer_.second_moments()[i]);
    params[i]->zero_grad();
  }
  optimizer_.set_steps(ckpt.optimizer_steps);
  epoch_ = ckpt.epoch;
  step_ = ckpt.step;
  curve_.clear();
}

Checkpoint make_checkpoint(const TrainConfig& config, const Vocabulary& vocab, const Model<float>& model,
                           const AdamW<float>* optimizer) {
  return make_checkpoint_impl(config, vocab, model, optimizer);
}

Model<float> model_from_checkpoint(const Checkpoint& ckpt) {
  TrainConfig config;
  try {
    config = TrainConfig::from_json(ckpt.config);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  const Vocabulary vocab = Vocabulary::from_json(ckpt.vocab);
  config.encoder.vocab_size = vocab.size();
  Model<float> model = Model<float>::create(config.encoder, config.share_params, config.seed);
  for (const auto& p : model.parameters()) copy_tensor(ckpt, p->name, p->value);
  return model;
}

namespace {

std::string format_loss(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

PretrainResult run_pretraining(const TrainConfig& config, const std::optional<std::filesystem::path>& resume,
                               const std::function<void(const EpochSummary&)>& on_epoch) {
  config.validate();
  if (config.annotated.empty() || config.vocab.empty() || config.output_dir.empty()) {
    throw DataError("config must name annotated, vocab and output_dir");
  }
  const Vocabulary vocab = Vocabulary::load(config.vocab);
  const std::vector<AnnotatedArticle> annotated = read_annotated(config.annotated);
  std::vector<TokenizedExample> examples;
  for (const AnnotatedArticle& a : annotated) {
    for (auto& ex : tokenize_annotated(a, vocab, config.encoder.max_len)) {
      std::size_t non_special = 0;
      for (TokenId id : ex.ids) non_special += Vocabulary::is_special(id) ? 0 : 1;
      if (non_special >= 2) examples.push_back(std::move(ex));
    }
  }
  if (examples.empty()) throw DataError(config.annotated + ": no usable training examples");
  ReplacementPool pool = build_replacement_pool(annotated, vocab);
  const bool needs_pool = config.scheme != Scheme::kMlmBaseline && !config.no_k_replace;
  if (needs_pool && pool.any.empty()) throw DataError(config.annotated + ": corpus has no knowledge spans to replace");

  Trainer<float> trainer(config, vocab, std::move(examples), std::move(pool));
  double best = std::numeric_limits<double>::infinity();
  bool has_best = false;
  if (resume) {
    const Checkpoint ckpt = load_checkpoint(*resume);
    trainer.restore(ckpt);
    if (ckpt.has_best_loss) {
      best = ckpt.best_loss;
      has_best = true;
    }
  }

  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const std::filesystem::path csv_path = dir / "loss.csv";
  const bool append = resume.has_value() && std::filesystem::exists(csv_path);
  std::ofstream csv(csv_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw DataError("cannot write " + csv_path.string());
  if (!append) csv << "step,epoch,loss_total,loss_gen,loss_disc\n";

  PretrainResult result;
  result.last_checkpoint = dir / "last.ckpt";
  result.best_checkpoint = dir / "best.ckpt";
  while (trainer.epochs_done() < static_cast<std::int64_t>(config.epochs)) {
    const std::size_t first_row = trainer.curve().size();
    const EpochSummary s = trainer.run_epoch();
    for (std::size_t i = first_row; i < trainer.curve().size(); ++i) {
      const LossRecord& r = trainer.curve()[i];
      csv << r.step << ',' << r.epoch << ',' << format_loss(r.losses.total) << ',' << format_loss(r.losses.gen)
          << ',' << format_loss(r.losses.disc) << '\n';
    }
    csv.flush();
    const bool improved = !has_best || s.mean.total < best;
    if (improved) {
      best = s.mean.total;
      has_best = true;
    }
    Checkpoint ckpt = trainer.checkpoint(vocab);
    ckpt.best_loss = best;
    ckpt.has_best_loss = has_best;
    save_checkpoint(result.last_checkpoint, ckpt);
    if (improved) save_checkpoint(result.best_checkpoint, ckpt);
    if (config.keep_epoch_checkpoints) save_checkpoint(dir / ("epoch-" + std::to_string(s.epoch) + ".ckpt"), ckpt);
    result.epochs.push_back(s);
    if (on_epoch) on_epoch(s);
  }
  return result;
}

#define SPANLM_INSTANTIATE_TRAINER(T)                                                                           \
  template Var<T> masked_token_nll(Var<T>, std::span<const TokenId>);                                          \
  template Var<T> replaced_token_bce(Var<T>, std::span<const std::uint8_t>);                                    \
  template Var<T> loss_gen(Tape<T>&, const Model<T>&, std::span<const GenExample>, const ForwardOptions&,        \
                           std::vector<Tensor<T>>*);                                                             \
  template Var<T> loss_disc(Tape<T>&, const Model<T>&, std::span<const DiscExample>, const ForwardOptions&);     \
  template std::vector<TokenId> fill_masked(const GenExample&, const Tensor<T>&, GenDecode, std::uint64_t,       \
                                            std::uint64_t, std::uint64_t);                                       \
  template class Trainer<T>;

SPANLM_INSTANTIATE_TRAINER(float)
SPANLM_INSTANTIATE_TRAINER(double)
#undef SPANLM_INSTANTIATE_TRAINER

}  // namespace spanlm
