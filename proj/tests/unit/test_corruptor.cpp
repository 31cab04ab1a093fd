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

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "spanlm/corruptor.hpp"
#include "spanlm/rng.hpp"
#include "spanlm/tokenizer.hpp"
#include "spanlm/wiki_corpus.hpp"
#include "test_support.hpp"

namespace spanlm {
namespace {

constexpr TokenId kWord = kFirstMergeToken;  // any non-special id

// CLS w0 .. w{n-1} SEP with distinct regular ids.
std::vector<TokenId> plain_sequence(std::size_t n) {
  std::vector<TokenId> ids{Specials::kCls};
  for (std::size_t i = 0; i < n; ++i) ids.push_back(kFirstByteToken + 10 + static_cast<TokenId>(i));
  ids.push_back(Specials::kSep);
  return ids;
}

// Straight-line restatement of the documented K-MASK draw loop.
std::vector<std::size_t> reference_mask_positions(const std::vector<TokenId>& ids,
                                                  const std::vector<TokenSpan>& spans, const MaskConfig& cfg,
                                                  std::uint64_t epoch, std::uint64_t example_id) {
  std::vector<bool> in_span(ids.size(), false);
  for (const TokenSpan& s : spans) {
    for (std::size_t i = s.range.begin; i < s.range.end; ++i) in_span[i] = true;
  }
  std::vector<std::size_t> free_pos;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < kFirstByteToken) continue;
    ++n;
    if (!in_span[i]) free_pos.push_back(i);
  }
  std::vector<TokenRange> open;
  for (const TokenSpan& s : spans) open.push_back(s.range);
  const auto budget = static_cast<std::size_t>(std::ceil(cfg.mask_ratio * static_cast<double>(n) - 1e-9));

  Rng rng(epoch_seed(cfg.seed ^ kMaskStream, epoch, example_id));
  std::set<std::size_t> masked;
  while (masked.size() < budget) {
    const double u = rng.uniform01();
    TokenRange pick;
    if (u < cfg.span_choice_prob && !open.empty()) {
      const auto k = rng.below(open.size());
      pick = open[k];
      open.erase(open.begin() + static_cast<long>(k));
    } else if (!free_pos.empty()) {
      const auto k = rng.below(free_pos.size());
      pick = {free_pos[k], free_pos[k] + 1};
      free_pos.erase(free_pos.begin() + static_cast<long>(k));
    } else if (!open.empty()) {
      const auto k = rng.below(open.size());
      pick = open[k];
      open.erase(open.begin() + static_cast<long>(k));
    } else {
      break;
    }
    for (std::size_t i = pick.begin; i < pick.end; ++i) masked.insert(i);
  }
  return {masked.begin(), masked.end()};
}

std::vector<std::size_t> masked_positions(const GenExample& g) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.mask_flags.size(); ++i) {
    if (g.mask_flags[i]) out.push_back(i);
  }
  return out;
}

// Random sequence of n regular tokens with sorted spans of 1..max_span tokens.
TokenizedExample random_example(Rng& rng, std::size_t n, std::size_t max_span) {
  TokenizedExample ex;
  ex.ids.push_back(Specials::kCls);
  for (std::size_t i = 0; i < n; ++i) ex.ids.push_back(kFirstByteToken + static_cast<TokenId>(rng.below(200)));
  ex.ids.push_back(Specials::kSep);
  std::size_t pos = 1;
  while (pos < n + 1) {
    pos += rng.below(8);
    const std::size_t len = 1 + rng.below(max_span);
    if (pos + len > n + 1) break;
    ex.spans.push_back({{pos, pos + len}, rng.below(2) ? std::optional<std::string>("T") : std::nullopt});
    pos += len;
  }
  return ex;
}

Vocabulary fixture_vocab() { return Vocabulary::load(testing::fixture("corpus50/vocab.json")); }

std::vector<AnnotatedArticle> fixture_annotated() {
  return read_annotated(testing::fixture("corpus50/annotated.jsonl"));
}

TEST(CorruptionBudget, CeilOfRatioTimesCount) {
  EXPECT_EQ(corruption_budget(0.15, 20), 3u);
  EXPECT_EQ(corruption_budget(0.15, 100), 15u);
  EXPECT_EQ(corruption_budget(0.15, 3), 1u);
  EXPECT_EQ(corruption_budget(0.15, 7), 2u);
}

TEST(KMask, TwentyTokensWithoutSpansMaskExactlyThree) {
  const auto ids = plain_sequence(20);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const GenExample g = k_mask(ids, {}, MaskConfig{0.15, 0.5, seed}, 0, 0);
    EXPECT_EQ(masked_positions(g).size(), 3u);
  }
}

TEST(KMask, MatchesReferenceSamplerOnOneFourTokenSpan) {
  const auto ids = plain_sequence(20);
  const std::vector<TokenSpan> spans{{{5, 9}, std::nullopt}};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const MaskConfig cfg{0.15, 0.5, seed};
    for (std::uint64_t epoch = 0; epoch < 3; ++epoch) {
      const GenExample g = k_mask(ids, spans, cfg, epoch, seed * 7);
      EXPECT_EQ(masked_positions(g), reference_mask_positions(ids, spans, cfg, epoch, seed * 7))
          << "seed " << seed << " epoch " << epoch;
    }
  }
}

TEST(KMask, FrozenPlansForSeedZero) {
  // Frozen from the reference sampler above. A span draw may overshoot the
  // budget of 3; a subword drawn first followed by the span gives 5.
  const auto ids = plain_sequence(20);
  const std::vector<TokenSpan> spans{{{5, 9}, std::nullopt}};
  const MaskConfig cfg{0.15, 0.5, 0};
  using Pos = std::vector<std::size_t>;
  EXPECT_EQ(masked_positions(k_mask(ids, spans, cfg, 0, 0)), (Pos{5, 6, 7, 8}));
  EXPECT_EQ(masked_positions(k_mask(ids, spans, cfg, 2, 0)), (Pos{1, 5, 6, 7, 8, 19}));
  EXPECT_EQ(masked_positions(k_mask(ids, spans, cfg, 3, 0)), (Pos{10, 15, 20}));
  EXPECT_EQ(masked_positions(k_mask(ids, spans, cfg, 0, 1)), (Pos{5, 6, 7, 8, 14}));
  EXPECT_EQ(masked_positions(k_mask(ids, spans, cfg, 0, 2)), (Pos{1, 14, 20}));
}

TEST(KMask, MaskedPositionsCarryMaskAndTargetsKeepOriginal) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const TokenizedExample ex = random_example(rng, 30, 5);
    const GenExample g = k_mask(ex.ids, ex.spans, MaskConfig{}, 0, static_cast<std::uint64_t>(trial));
    ASSERT_EQ(g.input_ids.size(), ex.ids.size());
    EXPECT_EQ(g.target_ids, ex.ids);
    for (std::size_t i = 0; i < ex.ids.size(); ++i) {
      EXPECT_EQ(g.mask_flags[i] == 1, g.input_ids[i] == Specials::kMask);
      if (!g.mask_flags[i]) {
        EXPECT_EQ(g.input_ids[i], ex.ids[i]);
      }
      if (Vocabulary::is_special(ex.ids[i])) {
        EXPECT_EQ(g.mask_flags[i], 0);
      }
    }
  }
}

TEST(KMask, SpansAreMaskedAtomically) {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const TokenizedExample ex = random_example(rng, 40, 5);
    const GenExample g = k_mask(ex.ids, ex.spans, MaskConfig{0.15, 0.8, 3}, 1, static_cast<std::uint64_t>(trial));
    for (const TokenSpan& s : ex.spans) {
      std::size_t count = 0;
      for (std::size_t i = s.range.begin; i < s.range.end; ++i) count += g.mask_flags[i];
      EXPECT_TRUE(count == 0 || count == s.range.size()) << "trial " << trial;
    }
  }
}

TEST(KMask, BudgetBoundsOverRandomSequences) {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 5 + rng.below(60);
    const TokenizedExample ex = random_example(rng, n, 5);
    const GenExample g = k_mask(ex.ids, ex.spans, MaskConfig{}, 0, static_cast<std::uint64_t>(trial));
    const std::size_t budget = corruption_budget(0.15, n);
    const std::size_t count = masked_positions(g).size();
    EXPECT_GE(count, budget);
    EXPECT_LE(count, budget + 4);
  }
}

TEST(KMask, DynamicMaskingVariesAcrossEpochsAndIsDeterministic) {
  const auto annotated = fixture_annotated();
  const Vocabulary vocab = fixture_vocab();
  std::size_t differing = 0;
  std::size_t total = 0;
  for (std::size_t a = 0; a < annotated.size(); ++a) {
    for (const TokenizedExample& ex : tokenize_annotated(annotated[a], vocab, 64)) {
      const GenExample e0 = k_mask(ex.ids, ex.spans, MaskConfig{}, 0, a);
      const GenExample e0b = k_mask(ex.ids, ex.spans, MaskConfig{}, 0, a);
      const GenExample e1 = k_mask(ex.ids, ex.spans, MaskConfig{}, 1, a);
      EXPECT_EQ(e0.mask_flags, e0b.mask_flags);
      differing += e0.mask_flags != e1.mask_flags ? 1 : 0;
      ++total;
    }
  }
  // Over 50 sentences, identical plans for both epochs would signal a
  // frozen seed; a few coincidences are expected.
  EXPECT_GT(differing, total * 3 / 4);
}

TEST(KMask, UnionOverEpochsCoversMoreThanOneEpoch) {
  const auto ids = plain_sequence(30);
  std::set<std::size_t> seen;
  for (std::uint64_t epoch = 0; epoch < 40; ++epoch) {
    for (std::size_t p : masked_positions(k_mask(ids, {}, MaskConfig{}, epoch, 0))) seen.insert(p);
  }
  EXPECT_GT(seen.size(), corruption_budget(0.15, 30));
  EXPECT_EQ(seen.size(), 30u);
}

TEST(KMask, RejectsShortSequencesAndBadSpans) {
  const std::vector<TokenId> one{Specials::kCls, kWord, Specials::kSep};
  EXPECT_THROW(k_mask(one, {}, MaskConfig{}, 0, 0), std::invalid_argument);
  const auto ids = plain_sequence(6);
  const std::vector<TokenSpan> over_special{{{0, 2}, std::nullopt}};
  EXPECT_THROW(k_mask(ids, over_special, MaskConfig{}, 0, 0), std::invalid_argument);
  const std::vector<TokenSpan> overlapping{{{1, 3}, std::nullopt}, {{2, 4}, std::nullopt}};
  EXPECT_THROW(k_mask(ids, overlapping, MaskConfig{}, 0, 0), std::invalid_argument);
  EXPECT_THROW(k_mask(ids, {}, MaskConfig{0.0, 0.5, 0}, 0, 0), std::invalid_argument);
  EXPECT_THROW(k_mask(ids, {}, MaskConfig{0.15, 1.5, 0}, 0, 0), std::invalid_argument);
}

TEST(EpochSeed, DeterministicAndSensitiveToEveryArgument) {
  EXPECT_EQ(epoch_seed(1, 2, 3), epoch_seed(1, 2, 3));
  EXPECT_NE(epoch_seed(1, 2, 3), epoch_seed(2, 2, 3));
  EXPECT_NE(epoch_seed(1, 2, 3), epoch_seed(1, 3, 3));
  EXPECT_NE(epoch_seed(1, 2, 3), epoch_seed(1, 2, 4));
  EXPECT_NE(epoch_seed(0, 0, 1), epoch_seed(0, 1, 0));
}

TEST(TokenizeAnnotated, WrapsWithClsSepAndKeepsSpansInside) {
  const auto annotated = fixture_annotated();
  const Vocabulary vocab = fixture_vocab();
  for (const AnnotatedArticle& a : annotated) {
    const auto examples = tokenize_annotated(a, vocab, 64);
    ASSERT_FALSE(examples.empty());
    for (const TokenizedExample& ex : examples) {
      ASSERT_GE(ex.ids.size(), 3u);
      EXPECT_LE(ex.ids.size(), 64u);
      EXPECT_EQ(ex.ids.front(), Specials::kCls);
      EXPECT_EQ(ex.ids.back(), Specials::kSep);
      std::size_t prev = 1;
      for (const TokenSpan& s : ex.spans) {
        EXPECT_GE(s.range.begin, prev);
        EXPECT_LT(s.range.begin, s.range.end);
        EXPECT_LE(s.range.end, ex.ids.size() - 1);
        prev = s.range.end;
      }
    }
  }
}

TEST(TokenizeAnnotated, LongTextIsWindowedAndStraddlingSpansDropped) {
  const Vocabulary vocab = Vocabulary::from_merges({});  // pure bytes
  AnnotatedArticle a;
  a.article.id = "x";
  a.article.text = "abcdefghij";
  a.spans.push_back({{0, 2}, "ab", Provenance::kAnchor, std::nullopt});
  a.spans.push_back({{3, 6}, "def", Provenance::kAnchor, std::nullopt});  // crosses the 5-token window edge
  a.spans.push_back({{6, 8}, "gh", Provenance::kAnchor, std::nullopt});
  const auto ex = tokenize_annotated(a, vocab, 7);
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[0].ids.size(), 7u);
  ASSERT_EQ(ex[0].spans.size(), 1u);
  EXPECT_EQ(ex[0].spans[0].range, (TokenRange{1, 3}));
  ASSERT_EQ(ex[1].spans.size(), 1u);
  EXPECT_EQ(ex[1].spans[0].range, (TokenRange{2, 4}));
  EXPECT_THROW(tokenize_annotated(a, vocab, 2), std::invalid_argument);
}

TEST(ReplacementPool, BucketsByTypeAndDeduplicates) {
  const Vocabulary vocab = fixture_vocab();
  AnnotatedArticle a;
  a.article.text = "Marta Velorn met Ivo Castellan in Dunmere and Marta Velorn left.";
  a.spans = {
      {{0, 12}, "Marta Velorn", Provenance::kAnchor, "PERSON"},
      {{17, 30}, "Ivo Castellan", Provenance::kAnchor, "PERSON"},
      {{34, 41}, "Dunmere", Provenance::kAnchor, "CITY"},
      {{46, 58}, "Marta Velorn", Provenance::kAnchor, "PERSON"},
  };
  AnnotatedArticle b;
  b.article.text = "Renna Dahl";
  b.spans = {{{0, 10}, "Renna Dahl", Provenance::kAlias, std::nullopt}};
  const std::vector<AnnotatedArticle> corpus{a, b};
  const ReplacementPool pool = build_replacement_pool(corpus, vocab);
  ASSERT_EQ(pool.typed.size(), 2u);
  EXPECT_EQ(pool.typed.at("PERSON").size(), 2u);
  EXPECT_EQ(pool.typed.at("CITY").size(), 1u);
  EXPECT_EQ(pool.any.size(), 4u);
  EXPECT_TRUE(std::is_sorted(pool.any.begin(), pool.any.end(),
                             [](const PoolEntry& x, const PoolEntry& y) { return x.surface < y.surface; }));
  for (const PoolEntry& e : pool.any) {
    EXPECT_EQ(vocab.decode(e.bare), e.surface);
    EXPECT_EQ(vocab.decode(e.spaced), " " + e.surface);
  }
}

TEST(KReplace, TinySequenceDrawsExactlyOneReplacement) {
  const Vocabulary vocab = fixture_vocab();
  const auto ids = plain_sequence(3);
  const ReplacementPool empty_pool;
  std::size_t changed_runs = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const DiscExample d = k_replace(ids, {}, empty_pool, vocab, MaskConfig{0.15, 0.5, seed}, 0, 0);
    ASSERT_EQ(d.input_ids.size(), ids.size());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) changed += d.input_ids[i] != ids[i] ? 1 : 0;
    EXPECT_LE(changed, 1u);
    changed_runs += changed;
  }
  EXPECT_GT(changed_runs, 90u);
}

TEST(KReplace, SpanIsReplacedBySameTypeSurfaceAllLabeledOne) {
  const Vocabulary vocab = fixture_vocab();
  ReplacementPool pool;
  auto entry = [&vocab](const std::string& s) { return PoolEntry{s, vocab.encode(s).ids, vocab.encode(" " + s).ids}; };
  pool.typed["PERSON"] = {entry("Christopher Nolan"), entry("Steven Spielberg")};
  pool.any = {entry("Christopher Nolan"), entry("Steven Spielberg"), entry("Dunmere")};

  const std::string text = "Inception was directed by Christopher Nolan";
  const Encoding enc = vocab.encode(text);
  std::vector<TokenId> ids{Specials::kCls};
  ids.insert(ids.end(), enc.ids.begin(), enc.ids.end());
  ids.push_back(Specials::kSep);
  const std::vector<ByteRange> byte_spans{{26, 43}};
  const auto aligned = align_spans(enc, byte_spans);
  ASSERT_EQ(aligned.size(), 1u);
  const TokenSpan span{{aligned[0].tokens.begin + 1, aligned[0].tokens.end + 1}, "PERSON"};
  const std::vector<TokenSpan> spans{span};

  const DiscExample d = k_replace(ids, spans, pool, vocab, MaskConfig{0.15, 1.0, 0}, 0, 0);
  ASSERT_EQ(d.replaced_regions.size(), 1u);
  const TokenRange r = d.replaced_regions[0];
  std::vector<TokenId> region(d.input_ids.begin() + static_cast<long>(r.begin),
                              d.input_ids.begin() + static_cast<long>(r.end));
  EXPECT_EQ(vocab.decode(region), " Steven Spielberg");
  for (std::size_t i = r.begin; i < r.end; ++i) EXPECT_EQ(d.labels[i], 1);
  std::vector<TokenId> out_ids(d.input_ids.begin() + 1, d.input_ids.end() - 1);
  EXPECT_EQ(vocab.decode(out_ids), "Inception was directed by Steven Spielberg");
}

TEST(KReplace, RandomSubwordEqualToOriginalIsLabeledZero) {
  // Scan seeds for a draw that lands on the original token. With no spans
  // and three tokens the plan is one subword draw.
  const Vocabulary vocab = fixture_vocab();
  const auto ids = plain_sequence(3);
  const ReplacementPool empty_pool;
  bool found = false;
  for (std::uint64_t seed = 0; seed < 200000 && !found; ++seed) {
    const DiscExample d = k_replace(ids, {}, empty_pool, vocab, MaskConfig{0.15, 0.5, seed}, 0, 0);
    if (d.input_ids != ids) continue;
    found = true;
    ASSERT_EQ(d.subword_positions.size(), 1u);
    EXPECT_EQ(d.labels[d.subword_positions[0]], 0);
    EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), 1), 0);
  }
  EXPECT_TRUE(found);
}

TEST(KReplace, LabelSoundnessOverSeededExamples) {
  const Vocabulary vocab = fixture_vocab();
  const auto annotated = fixture_annotated();
  const ReplacementPool pool = build_replacement_pool(annotated, vocab);
  std::size_t replaced_spans = 0;
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    const auto examples = tokenize_annotated(annotated[trial % annotated.size()], vocab, 64);
    const TokenizedExample& ex = examples.front();
    const DiscExample d = k_replace(ex.ids, ex.spans, pool, vocab, MaskConfig{0.15, 0.5, trial}, trial / 50, trial);
    ASSERT_EQ(d.input_ids.size(), d.labels.size());
    ASSERT_EQ(d.input_ids.size(), d.origin_ids.size());
    std::vector<bool> in_region(d.input_ids.size(), false);
    for (const TokenRange& r : d.replaced_regions) {
      ++replaced_spans;
      for (std::size_t i = r.begin; i < r.end; ++i) in_region[i] = true;
    }
    for (std::size_t i = 0; i < d.input_ids.size(); ++i) {
      if (in_region[i]) {
        EXPECT_EQ(d.labels[i], 1);
        continue;
      }
      EXPECT_EQ(d.labels[i] == 1, d.input_ids[i] != d.origin_ids[i]) << "trial " << trial << " pos " << i;
      if (Vocabulary::is_special(d.origin_ids[i])) {
        EXPECT_EQ(d.input_ids[i], d.origin_ids[i]);
      }
    }
  }
  EXPECT_GT(replaced_spans, 100u);
}

TEST(KReplace, BudgetAccountingOverRandomSequences) {
  const Vocabulary vocab = fixture_vocab();
  const ReplacementPool pool = build_replacement_pool(fixture_annotated(), vocab);
  Rng rng(14);
  for (std::uint64_t trial = 0; trial < 500; ++trial) {
    const std::size_t n = 5 + rng.below(60);
    TokenizedExample ex = random_example(rng, n, 5);
    for (TokenSpan& s : ex.spans) s.type_tag.reset();
    const DiscExample d = k_replace(ex.ids, ex.spans, pool, vocab, MaskConfig{}, 0, trial);
    ASSERT_EQ(d.replaced_regions.size(), d.replaced_spans.size());
    std::size_t count = d.subword_positions.size();
    for (const TokenRange& r : d.replaced_spans) count += r.size();
    const std::size_t budget = corruption_budget(0.15, n);
    EXPECT_GE(count, budget) << "trial " << trial;
    EXPECT_LE(count, budget + 4) << "trial " << trial;
  }
}

TEST(KReplace, UntouchedSpansSurviveIntact) {
  const Vocabulary vocab = fixture_vocab();
  const auto annotated = fixture_annotated();
  const ReplacementPool pool = build_replacement_pool(annotated, vocab);
  for (std::uint64_t a = 0; a < annotated.size(); ++a) {
    const TokenizedExample ex = tokenize_annotated(annotated[a], vocab, 64).front();
    const DiscExample d = k_replace(ex.ids, ex.spans, pool, vocab, MaskConfig{0.15, 0.5, 5}, 2, a);
    // Walk original and output in lockstep; a span is either one replaced
    // region or copied token for token.
    std::size_t out = 0;
    std::size_t region = 0;
    std::size_t in = 0;
    std::size_t next_span = 0;
    while (in < ex.ids.size()) {
      const bool span_here = next_span < ex.spans.size() && ex.spans[next_span].range.begin == in;
      if (span_here && region < d.replaced_regions.size() && d.replaced_regions[region].begin == out) {
        out = d.replaced_regions[region++].end;
        in = ex.spans[next_span++].range.end;
        continue;
      }
      if (span_here) {
        for (std::size_t i = ex.spans[next_span].range.begin; i < ex.spans[next_span].range.end; ++i, ++out) {
          EXPECT_EQ(d.input_ids[out], ex.ids[i]) << "article " << a;
        }
        in = ex.spans[next_span++].range.end;
        continue;
      }
      ++in;
      ++out;
    }
    EXPECT_EQ(out, d.input_ids.size());
    EXPECT_EQ(region, d.replaced_regions.size());
  }
}

TEST(KReplace, EqualLengthOptionPreservesLength) {
  const Vocabulary vocab = fixture_vocab();
  const auto annotated = fixture_annotated();
  const ReplacementPool pool = build_replacement_pool(annotated, vocab);
  ReplaceOptions ro;
  ro.require_equal_length = true;
  for (std::uint64_t a = 0; a < annotated.size(); ++a) {
    const TokenizedExample ex = tokenize_annotated(annotated[a], vocab, 64).front();
    for (std::uint64_t epoch = 0; epoch < 4; ++epoch) {
      const DiscExample d = k_replace(ex.ids, ex.spans, pool, vocab, MaskConfig{0.15, 0.9, 1}, epoch, a, ro);
      ASSERT_EQ(d.input_ids.size(), ex.ids.size());
      for (std::size_t i = 0; i < ex.ids.size(); ++i) EXPECT_EQ(d.origin_ids[i], ex.ids[i]);
    }
  }
}

TEST(KReplace, ExcludedPositionsAreNeverDrawnAsSubwords) {
  const Vocabulary vocab = fixture_vocab();
  const auto ids = plain_sequence(20);
  std::vector<std::uint8_t> exclude(ids.size(), 0);
  for (std::size_t i = 1; i <= 15; ++i) exclude[i] = 1;
  ReplaceOptions ro;
  ro.exclude_subwords = exclude;
  const ReplacementPool empty_pool;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const DiscExample d = k_replace(ids, {}, empty_pool, vocab, MaskConfig{0.15, 0.5, seed}, 0, 0, ro);
    for (std::size_t i = 1; i <= 15; ++i) EXPECT_EQ(d.input_ids[i], ids[i]);
  }
}

TEST(KReplace, MaxLenCapsLengthChangingSplices) {
  const Vocabulary vocab = fixture_vocab();
  const auto annotated = fixture_annotated();
  const ReplacementPool pool = build_replacement_pool(annotated, vocab);
  for (std::uint64_t a = 0; a < annotated.size(); ++a) {
    const TokenizedExample ex = tokenize_annotated(annotated[a], vocab, 64).front();
    ReplaceOptions ro;
    ro.max_len = ex.ids.size();
    const DiscExample d = k_replace(ex.ids, ex.spans, pool, vocab, MaskConfig{0.15, 1.0, 2}, 0, a, ro);
    EXPECT_LE(d.input_ids.size(), ex.ids.size());
  }
}

TEST(KReplace, ErrorsOnEmptyPoolAndMismatchedExclusions) {
  const Vocabulary vocab = fixture_vocab();
  const auto ids = plain_sequence(8);
  const std::vector<TokenSpan> spans{{{2, 4}, std::nullopt}};
  const ReplacementPool empty_pool;
  EXPECT_THROW(k_replace(ids, spans, empty_pool, vocab, MaskConfig{}, 0, 0), std::invalid_argument);
  const std::vector<std::uint8_t> short_mask(3, 0);
  ReplaceOptions ro;
  ro.exclude_subwords = short_mask;
  EXPECT_THROW(k_replace(ids, {}, empty_pool, vocab, MaskConfig{}, 0, 0, ro), std::invalid_argument);
}

TEST(KReplace, DeterministicPerSeedEpochAndExample) {
  const Vocabulary vocab = fixture_vocab();
  const auto annotated = fixture_annotated();
  const ReplacementPool pool = build_replacement_pool(annotated, vocab);
  const TokenizedExample ex = tokenize_annotated(annotated[3], vocab, 64).front();
  const DiscExample a = k_replace(ex.ids, ex.spans, pool, vocab, MaskConfig{}, 4, 3);
  const DiscExample b = k_replace(ex.ids, ex.spans, pool, vocab, MaskConfig{}, 4, 3);
  EXPECT_EQ(a.input_ids, b.input_ids);
  EXPECT_EQ(a.labels, b.labels);
}

}  // namespace
}  // namespace spanlm
