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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "spanlm/checkpoint.hpp"
#include "spanlm/error.hpp"
#include "spanlm/qa.hpp"
#include "spanlm/rng.hpp"
#include "spanlm/trainer.hpp"
#include "test_support.hpp"

namespace spanlm {
namespace {

struct Corpus {
  Vocabulary vocab;
  std::vector<AnnotatedArticle> annotated;
  std::vector<TokenizedExample> examples;
  ReplacementPool pool;
};

const Corpus& corpus50() {
  static const Corpus c = [] {
    Corpus out{Vocabulary::load(testing::fixture("corpus50/vocab.json")),
               read_annotated(testing::fixture("corpus50/annotated.jsonl")),
               {},
               {}};
    for (const AnnotatedArticle& a : out.annotated) {
      for (TokenizedExample& ex : tokenize_annotated(a, out.vocab, 64)) out.examples.push_back(std::move(ex));
    }
    out.pool = build_replacement_pool(out.annotated, out.vocab);
    return out;
  }();
  return c;
}

TrainConfig tiny_config(Scheme scheme, double lambda) {
  TrainConfig c;
  c.scheme = scheme;
  c.lambda = lambda;
  c.batch_size = 4;
  c.seed = 3;
  c.optimizer.lr = 1e-3;
  c.encoder.layers = 1;
  c.encoder.hidden = 16;
  c.encoder.heads = 2;
  c.encoder.ffn_dim = 32;
  c.encoder.max_len = 64;
  c.encoder.vocab_size = corpus50().vocab.size();
  return c;
}

template <typename T>
Trainer<T> make_trainer(const TrainConfig& c, std::size_t n_examples = 12) {
  const Corpus& corpus = corpus50();
  std::vector<TokenizedExample> ex(corpus.examples.begin(),
                                   corpus.examples.begin() + static_cast<long>(n_examples));
  return Trainer<T>(c, corpus.vocab, std::move(ex), corpus.pool);
}

std::vector<std::size_t> first_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

TEST(MaskedTokenNll, UniformLogitsGiveLogVocab) {
  Tape<double> tape;
  const Var<double> logits = tape.constant(Tensor<double>(Shape{3, 50}, 0.0));
  const std::vector<TokenId> targets{7, 0, 49};
  EXPECT_NEAR(masked_token_nll(logits, std::span<const TokenId>(targets)).value().item(), std::log(50.0), 1e-12);
}

TEST(MaskedTokenNll, HandComputedRow) {
  // Row (0, 0, ln 2): p(2) = 2 / 4.
  Tape<double> tape;
  const Var<double> logits = tape.constant(Tensor<double>(Shape{1, 3}, std::vector<double>{0, 0, std::log(2.0)}));
  const std::vector<TokenId> target{2};
  EXPECT_NEAR(masked_token_nll(logits, std::span<const TokenId>(target)).value().item(), std::log(2.0), 1e-12);
}

TEST(LossGen, RejectsBatchWithoutMaskedPositions) {
  const auto m = Model<double>::create(tiny_config(Scheme::kPipeline, 1).encoder, true, 1);
  GenExample g;
  g.input_ids = {Specials::kCls, 300, 301, Specials::kSep};
  g.target_ids = g.input_ids;
  g.mask_flags.assign(4, 0);
  const std::vector<GenExample> batch{g};
  Tape<double> tape;
  EXPECT_THROW(loss_gen(tape, m, std::span<const GenExample>(batch)), std::invalid_argument);
}

TEST(ReplacedTokenBce, ZeroLogitsGiveLn2ForEitherLabel) {
  Tape<double> tape;
  const Var<double> logits = tape.constant(Tensor<double>(Shape{4, 1}, 0.0));
  const std::vector<std::uint8_t> zeros{0, 0, 0, 0};
  const std::vector<std::uint8_t> mixed{1, 0, 1, 1};
  EXPECT_NEAR(replaced_token_bce(logits, std::span<const std::uint8_t>(zeros)).value().item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(replaced_token_bce(logits, std::span<const std::uint8_t>(mixed)).value().item(), std::log(2.0), 1e-12);
}

TEST(ReplacedTokenBce, HandSetThreeTokenCase) {
  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  Tape<double> tape;
  const Var<double> logits =
      tape.constant(Tensor<double>(Shape{3, 1}, std::vector<double>{logit(0.9), logit(0.2), logit(0.6)}));
  const std::vector<std::uint8_t> labels{1, 0, 1};
  const double expected = -(std::log(0.9) + std::log(0.8) + std::log(0.6)) / 3.0;
  EXPECT_NEAR(replaced_token_bce(logits, std::span<const std::uint8_t>(labels)).value().item(), expected, 1e-12);
}

TEST(ReplacedTokenBce, LargeLogitsStayFinite) {
  Tape<double> tape;
  const Var<double> logits = tape.constant(Tensor<double>(Shape{2, 1}, std::vector<double>{1000.0, -1000.0}));
  const std::vector<std::uint8_t> labels{0, 1};
  EXPECT_NEAR(replaced_token_bce(logits, std::span<const std::uint8_t>(labels)).value().item(), 1000.0, 1e-9);
}

TEST(LossDisc, ZeroOutputVectorGivesLn2) {
  auto m = Model<double>::create(tiny_config(Scheme::kTwoTower, 1).encoder, true, 2);
  m.disc.w->value.fill(0.0);
  DiscExample d;
  d.input_ids = {Specials::kCls, 300, 301, 302, Specials::kSep};
  d.labels = {0, 1, 0, 1, 0};
  d.origin_ids = d.input_ids;
  const std::vector<DiscExample> batch{d};
  Tape<double> tape;
  EXPECT_NEAR(loss_disc(tape, m, std::span<const DiscExample>(batch)).value().item(), std::log(2.0), 1e-12);
}

class LambdaLinearity : public ::testing::TestWithParam<std::tuple<Scheme, double>> {};

TEST_P(LambdaLinearity, TotalIsGenPlusLambdaDisc) {
  const auto [scheme, lambda] = GetParam();
  Trainer<double> t = make_trainer<double>(tiny_config(scheme, lambda));
  for (int e = 0; e < 2; ++e) t.run_epoch();
  for (const LossRecord& r : t.curve()) {
    const StepLosses& l = r.losses;
    const double expected = l.gen + lambda * l.disc;
    EXPECT_LE(std::abs(l.total - expected), 1e-6 * std::max(1.0, std::abs(expected))) << "step " << r.step;
    EXPECT_GT(l.disc, 0.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Schemes, LambdaLinearity,
                         ::testing::Combine(::testing::Values(Scheme::kTwoTower, Scheme::kPipeline),
                                            ::testing::Values(0.0, 1.0, 25.0)));

TEST(Trainer, LambdaZeroMatchesGenOnlyStepForStep) {
  for (Scheme scheme : {Scheme::kTwoTower, Scheme::kPipeline}) {
    Trainer<double> zero = make_trainer<double>(tiny_config(scheme, 0.0));
    TrainConfig gen_only_cfg = tiny_config(scheme, 25.0);
    gen_only_cfg.no_disc = true;
    Trainer<double> gen_only = make_trainer<double>(gen_only_cfg);
    for (int e = 0; e < 3; ++e) {
      zero.run_epoch();
      gen_only.run_epoch();
    }
    ASSERT_EQ(zero.curve().size(), gen_only.curve().size());
    for (std::size_t i = 0; i < zero.curve().size(); ++i) {
      EXPECT_EQ(zero.curve()[i].losses.total, gen_only.curve()[i].losses.total) << "step " << i + 1;
      EXPECT_EQ(zero.curve()[i].losses.gen, gen_only.curve()[i].losses.gen) << "step " << i + 1;
    }
  }
}

TEST(Trainer, MlmBaselineMasksWithoutSpansAndReportsNoDisc) {
  Trainer<double> t = make_trainer<double>(tiny_config(Scheme::kMlmBaseline, 25.0));
  const StepLosses l = t.step(first_ids(4), 0);
  EXPECT_EQ(l.disc, 0.0);
  EXPECT_EQ(l.total, l.gen);
  EXPECT_TRUE(t.last_disc_batch().empty());
}

TEST(Pipeline, TeacherForcedWithoutKReplaceLabelsAllZero) {
  TrainConfig c = tiny_config(Scheme::kPipeline, 25.0);
  c.gen_decode = GenDecode::kOriginal;
  c.no_k_replace = true;
  Trainer<double> t = make_trainer<double>(c);
  const StepLosses l = t.evaluate(first_ids(8), 0);
  ASSERT_EQ(t.last_disc_batch().size(), 8u);
  for (const DiscExample& d : t.last_disc_batch()) {
    for (std::uint8_t y : d.labels) EXPECT_EQ(y, 0);
  }
  EXPECT_GT(l.disc, 0.0);
  EXPECT_LT(l.disc, std::log(2.0) + 0.1);
}

// Independent restatement of the documented sampling rule.
std::vector<TokenId> reference_fill(const GenExample& gen, const Tensor<double>& logits, std::uint64_t seed,
                                    std::uint64_t epoch, std::uint64_t id) {
  std::vector<TokenId> out = gen.target_ids;
  Rng rng(epoch_seed(seed ^ kSampleStream, epoch, id));
  std::size_t row = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!gen.mask_flags[i]) continue;
    const std::size_t v = logits.cols();
    double mx = -1e300;
    for (std::size_t k = kFirstByteToken; k < v; ++k) mx = std::max(mx, logits.at(row, k));
    double z = 0;
    for (std::size_t k = kFirstByteToken; k < v; ++k) z += std::exp(logits.at(row, k) - mx);
    const double u = rng.uniform01();
    double acc = 0;
    TokenId pick = static_cast<TokenId>(v - 1);
    for (std::size_t k = kFirstByteToken; k < v; ++k) {
      acc += std::exp(logits.at(row, k) - mx) / z;
      if (acc > u) {
        pick = static_cast<TokenId>(k);
        break;
      }
    }
    out[i] = pick;
    ++row;
  }
  return out;
}

TEST(Pipeline, LabelsMatchIndependentRederivation) {
  const TrainConfig c = tiny_config(Scheme::kPipeline, 25.0);
  Trainer<double> t = make_trainer<double>(c);
  t.run_epoch();  // move away from the initial weights
  const std::vector<std::size_t> ids = first_ids(8);
  const std::uint64_t epoch = 1;
  t.evaluate(ids, epoch);
  const Corpus& corpus = corpus50();
  std::size_t labeled = 0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const TokenizedExample& ex = corpus.examples[ids[k]];
    // (1) K-MASK
    const GenExample gen = k_mask(ex.ids, ex.spans, c.mask_config(), epoch, ids[k]);
    // (2) generator forward
    std::vector<Tensor<double>> logits;
    Tape<double> tape;
    const std::vector<GenExample> one{gen};
    loss_gen(tape, t.model(), std::span<const GenExample>(one), {}, &logits);
    // (3) splice samples
    const std::vector<TokenId> recovered = reference_fill(gen, logits[0], c.seed, epoch, ids[k]);
    // (4) K-Replace on the recovered sequence, sparing generator-filled subwords
    ReplaceOptions ro;
    ro.require_equal_length = true;
    ro.exclude_subwords = gen.mask_flags;
    const DiscExample d = k_replace(recovered, ex.spans, corpus.pool, corpus.vocab, c.replace_config(), epoch,
                                    ids[k], ro);
    // (5) label = final token differs from the original
    std::vector<std::uint8_t> labels(d.input_ids.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = d.input_ids[i] != ex.ids[i] ? 1 : 0;
    const DiscExample& got = t.last_disc_batch()[k];
    EXPECT_EQ(got.input_ids, d.input_ids) << "example " << ids[k];
    EXPECT_EQ(got.labels, labels) << "example " << ids[k];
    labeled += static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  }
  EXPECT_GT(labeled, 0u);
}

TEST(Pipeline, NoGradientThroughSampledTokens) {
  Trainer<double> t = make_trainer<double>(tiny_config(Scheme::kPipeline, 25.0));
  t.evaluate(first_ids(4), 0);
  Tape<double> tape;
  const Var<double> gen = loss_gen(tape, t.model(), std::span<const GenExample>(t.last_gen_batch()));
  const Var<double> disc = loss_disc(tape, t.model(), std::span<const DiscExample>(t.last_disc_batch()));
  EXPECT_TRUE(tape.depends_on(gen, *t.model().mlm.bias));
  EXPECT_FALSE(tape.depends_on(disc, *t.model().mlm.bias));
  EXPECT_TRUE(tape.depends_on(disc, *t.model().disc.W));
  EXPECT_FALSE(tape.depends_on(gen, *t.model().disc.W));
  // Shared encoder: both losses reach the token embedding.
  EXPECT_TRUE(tape.depends_on(gen, *t.model().gen_encoder->token_embedding));
  EXPECT_TRUE(tape.depends_on(disc, *t.model().gen_encoder->token_embedding));
}

TEST(Trainer, UnsharedEncodersDivergeFromShared) {
  TrainConfig shared_cfg = tiny_config(Scheme::kTwoTower, 25.0);
  TrainConfig split_cfg = shared_cfg;
  split_cfg.share_params = false;
  Trainer<double> shared = make_trainer<double>(shared_cfg);
  Trainer<double> split = make_trainer<double>(split_cfg);
  EXPECT_TRUE(shared.model().shared());
  EXPECT_FALSE(split.model().shared());
  shared.run_epoch();
  split.run_epoch();
  // Identical starting point, so the first step agrees.
  EXPECT_NEAR(shared.curve()[0].losses.total, split.curve()[0].losses.total, 1e-12);
  EXPECT_NE(shared.curve().back().losses.total, split.curve().back().losses.total);
  EXPECT_NE(split.model().gen_encoder->token_embedding->value, split.model().disc_encoder->token_embedding->value);
}

TEST(Trainer, StepsPerEpochIsCeilOfExamplesOverBatch) {
  for (std::size_t n : {1u, 4u, 5u, 12u}) {
    Trainer<float> t = make_trainer<float>(tiny_config(Scheme::kPipeline, 25.0), n);
    const EpochSummary s = t.run_epoch();
    EXPECT_EQ(s.steps, (n + 3) / 4) << n;
    EXPECT_EQ(t.steps_done(), static_cast<std::int64_t>((n + 3) / 4));
  }
}

TEST(Trainer, EpochOrderIsASeededPermutation) {
  Trainer<float> t = make_trainer<float>(tiny_config(Scheme::kPipeline, 25.0));
  const auto a = t.epoch_order(0);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, first_ids(12));
  EXPECT_EQ(a, t.epoch_order(0));
  EXPECT_NE(a, t.epoch_order(1));
}

TEST(Trainer, SameSeedGivesIdenticalCurves) {
  for (Scheme scheme : {Scheme::kTwoTower, Scheme::kPipeline, Scheme::kMlmBaseline}) {
    Trainer<float> a = make_trainer<float>(tiny_config(scheme, 25.0));
    Trainer<float> b = make_trainer<float>(tiny_config(scheme, 25.0));
    for (int e = 0; e < 2; ++e) {
      a.run_epoch();
      b.run_epoch();
    }
    ASSERT_EQ(a.curve().size(), b.curve().size());
    for (std::size_t i = 0; i < a.curve().size(); ++i) {
      EXPECT_EQ(a.curve()[i].losses.total, b.curve()[i].losses.total);
    }
  }
}

TEST(Trainer, AblationFlagsChangeTheCurve) {
  const TrainConfig base = tiny_config(Scheme::kTwoTower, 25.0);
  TrainConfig no_kr = base;
  no_kr.no_k_replace = true;
  Trainer<float> a = make_trainer<float>(base);
  Trainer<float> b = make_trainer<float>(no_kr);
  a.run_epoch();
  b.run_epoch();
  EXPECT_NE(a.curve().front().losses.disc, b.curve().front().losses.disc);
  for (const DiscExample& d : b.last_disc_batch()) EXPECT_TRUE(d.replaced_regions.empty());
}

TEST(Checkpoint, RoundTripRestoresModelAndCounters) {
  const Corpus& corpus = corpus50();
  Trainer<float> t = make_trainer<float>(tiny_config(Scheme::kPipeline, 25.0));
  t.run_epoch();
  const auto dir = testing::scratch_dir("trainer_ckpt");
  save_checkpoint(dir / "a.ckpt", t.checkpoint(corpus.vocab));
  const Checkpoint loaded = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(loaded.epoch, 1);
  EXPECT_EQ(loaded.step, t.steps_done());

  Trainer<float> u = make_trainer<float>(tiny_config(Scheme::kPipeline, 25.0));
  u.restore(loaded);
  const auto pt = t.model().parameters();
  const auto pu = u.model().parameters();
  ASSERT_EQ(pt.size(), pu.size());
  for (std::size_t i = 0; i < pt.size(); ++i) EXPECT_EQ(pt[i]->value, pu[i]->value) << pt[i]->name;
  // Continuing both gives the same next epoch.
  EXPECT_EQ(t.run_epoch().mean.total, u.run_epoch().mean.total);

  const Model<float> m = model_from_checkpoint(loaded);
  EXPECT_EQ(m.parameters().size(), pt.size());
}

TEST(Checkpoint, CorruptionIsDetected) {
  const Corpus& corpus = corpus50();
  Trainer<float> t = make_trainer<float>(tiny_config(Scheme::kPipeline, 25.0));
  const auto dir = testing::scratch_dir("trainer_ckpt_bad");
  save_checkpoint(dir / "a.ckpt", t.checkpoint(corpus.vocab));
  const std::string good = testing::read_file(dir / "a.ckpt");

  std::string flipped = good;
  flipped[flipped.size() - 3] = static_cast<char>(flipped[flipped.size() - 3] ^ 0x40);
  testing::write_file(dir / "flipped.ckpt", flipped);
  EXPECT_THROW(load_checkpoint(dir / "flipped.ckpt"), DataError);

  std::string version = good;
  version[5] = 0x02;
  testing::write_file(dir / "version.ckpt", version);
  EXPECT_THROW(load_checkpoint(dir / "version.ckpt"), DataError);

  testing::write_file(dir / "short.ckpt", good.substr(0, good.size() / 2));
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), DataError);

  testing::write_file(dir / "magic.ckpt", "XXXXX" + good.substr(5));
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), DataError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), DataError);
}

TrainConfig fixture_run_config(const std::filesystem::path& out, std::size_t epochs) {
  TrainConfig c = tiny_config(Scheme::kPipeline, 25.0);
  c.annotated = testing::fixture("corpus50/annotated.jsonl").string();
  c.vocab = testing::fixture("corpus50/vocab.json").string();
  c.output_dir = out.string();
  c.epochs = epochs;
  c.keep_epoch_checkpoints = true;
  return c;
}

TEST(RunPretraining, WritesArtifactsAndIsBitReproducible) {
  const auto dir = testing::scratch_dir("pretrain_repro");
  const PretrainResult a = run_pretraining(fixture_run_config(dir / "a", 2));
  const PretrainResult b = run_pretraining(fixture_run_config(dir / "b", 2));
  ASSERT_EQ(a.epochs.size(), 2u);
  for (const char* f : {"loss.csv", "last.ckpt", "best.ckpt", "epoch-1.ckpt", "epoch-2.ckpt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;
    EXPECT_EQ(testing::read_file(dir / "a" / f), testing::read_file(dir / "b" / f)) << f;
  }
  const std::string csv = testing::read_file(dir / "a" / "loss.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,epoch,loss_total,loss_gen,loss_disc");
}

TEST(RunPretraining, ResumeMatchesUninterruptedRun) {
  const auto dir = testing::scratch_dir("pretrain_resume");
  const PretrainResult full = run_pretraining(fixture_run_config(dir / "full", 3));
  const PretrainResult resumed =
      run_pretraining(fixture_run_config(dir / "resumed", 3), dir / "full" / "epoch-1.ckpt");
  ASSERT_EQ(full.epochs.size(), 3u);
  ASSERT_EQ(resumed.epochs.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(resumed.epochs[k].epoch, full.epochs[k + 1].epoch);
    EXPECT_EQ(resumed.epochs[k].mean.total, full.epochs[k + 1].mean.total);
    EXPECT_EQ(resumed.epochs[k].mean.gen, full.epochs[k + 1].mean.gen);
    EXPECT_EQ(resumed.epochs[k].mean.disc, full.epochs[k + 1].mean.disc);
  }
  EXPECT_EQ(testing::read_file(dir / "full" / "last.ckpt"), testing::read_file(dir / "resumed" / "last.ckpt"));
}

TEST(RunPretraining, MissingInputsAreDataErrors) {
  const auto dir = testing::scratch_dir("pretrain_missing");
  TrainConfig c = fixture_run_config(dir, 1);
  c.annotated = (dir / "nope.jsonl").string();
  EXPECT_THROW(run_pretraining(c), DataError);
}

// Monotone overfit with the default configuration: both epoch-mean losses
// strictly decrease over the first 20 epochs.
TEST(RunPretraining, DefaultConfigLossesDecreaseForTwentyEpochs) {
  const auto dir = testing::scratch_dir("pretrain_monotone");
  TrainConfig c;
  c.annotated = testing::fixture("corpus50/annotated.jsonl").string();
  c.vocab = testing::fixture("corpus50/vocab.json").string();
  c.output_dir = dir.string();
  c.epochs = 20;
  const PretrainResult r = run_pretraining(c);
  ASSERT_EQ(r.epochs.size(), 20u);
  for (std::size_t e = 1; e < r.epochs.size(); ++e) {
    EXPECT_LT(r.epochs[e].mean.gen, r.epochs[e - 1].mean.gen) << "L_gen, epoch " << e + 1;
    EXPECT_LT(r.epochs[e].mean.disc, r.epochs[e - 1].mean.disc) << "L_disc, epoch " << e + 1;
  }
}

TEST(Qa, WholeContextAnswerSpansEveryContextToken) {
  const Vocabulary& vocab = corpus50().vocab;
  const QaItem item{"q", "Where ?", "Kestrel Harbor", {"Kestrel Harbor"}};
  const QaExample ex = build_qa_example(item, vocab, 64);
  ASSERT_TRUE(ex.gold_start && ex.gold_end);
  EXPECT_EQ(*ex.gold_start, ex.context_begin);
  EXPECT_EQ(*ex.gold_end, ex.context_end - 1);
  EXPECT_EQ(ex.ids.front(), Specials::kCls);
  EXPECT_EQ(ex.ids[ex.context_begin - 1], Specials::kSep);
  EXPECT_EQ(ex.ids.back(), Specials::kSep);
}

TEST(Qa, AbsentAnswerHasNoGoldAndIsSkipped) {
  const Vocabulary& vocab = corpus50().vocab;
  const QaItem item{"q", "Who ?", "Marta Velorn was born in Dunmere.", {"Greywick"}};
  EXPECT_FALSE(build_qa_example(item, vocab, 64).gold_start.has_value());
  auto m = Model<float>::create(tiny_config(Scheme::kPipeline, 1).encoder, true, 1);
  std::vector<std::string> warnings;
  const QaItem ok{"p", "Where ?", "Marta Velorn was born in Dunmere.", {"Dunmere"}};
  const std::vector<QaItem> items{item, ok};
  QaConfig qc;
  qc.epochs = 1;
  const FinetuneReport rep = finetune_qa(m, std::span<const QaItem>(items), vocab, qc,
                                         [&warnings](const std::string& w) { warnings.push_back(w); });
  EXPECT_EQ(rep.skipped, 1u);
  EXPECT_EQ(warnings.size(), 1u);
  const std::vector<QaItem> only_absent{item};
  EXPECT_THROW(finetune_qa(m, std::span<const QaItem>(only_absent), vocab, qc), DataError);
}

TEST(Qa, PredictedSpanLiesInsideContextAndRespectsCap) {
  const Vocabulary& vocab = corpus50().vocab;
  const auto m = Model<float>::create(tiny_config(Scheme::kPipeline, 1).encoder, true, 4);
  const QaItem item{"q", "Who founded Halcyon Press ?", "Halcyon Press was founded in Lowen by Yara Holt.", {"Yara Holt"}};
  const QaExample ex = build_qa_example(item, vocab, 64);
  for (std::size_t cap : {1u, 2u, 30u}) {
    const QaSpan s = predict_span(m, ex, item.context, cap);
    EXPECT_GE(s.start, ex.context_begin);
    EXPECT_LE(s.start, s.end);
    EXPECT_LT(s.end, ex.context_end);
    EXPECT_LT(s.end - s.start, cap);
    EXPECT_NE(item.context.find(s.text), std::string::npos);
  }
}

}  // namespace
}  // namespace spanlm
