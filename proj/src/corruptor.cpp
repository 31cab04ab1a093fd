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

#include "spanlm/corruptor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "spanlm/rng.hpp"

namespace spanlm {

void MaskConfig::validate() const {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw std::invalid_argument("mask_ratio must lie in (0, 1)");
  if (!(span_choice_prob >= 0.0 && span_choice_prob <= 1.0)) {
    throw std::invalid_argument("span_choice_prob must lie in [0, 1]");
  }
}

std::vector<TokenizedExample> tokenize_annotated(const AnnotatedArticle& article, const Vocabulary& vocab,
                                                 std::size_t max_len) {
  if (max_len < 3) throw std::invalid_argument("max_len must leave room for CLS, SEP and one token");
  const Encoding enc = vocab.encode(article.article.text);
  std::vector<ByteRange> ranges;
  ranges.reserve(article.spans.size());
  for (const KnowledgeSpan& s : article.spans) ranges.push_back(s.range);
  const std::vector<AlignedSpan> aligned = align_spans(enc, ranges);

  std::vector<TokenizedExample> out;
  const std::size_t window = max_len - 2;
  std::size_t next_span = 0;
  for (std::size_t start = 0; start < enc.ids.size(); start += window) {
    const std::size_t stop = std::min(enc.ids.size(), start + window);
    TokenizedExample ex;
    ex.ids.reserve(stop - start + 2);
    ex.ids.push_back(Specials::kCls);
    ex.ids.insert(ex.ids.end(), enc.ids.begin() + static_cast<std::ptrdiff_t>(start),
                  enc.ids.begin() + static_cast<std::ptrdiff_t>(stop));
    ex.ids.push_back(Specials::kSep);
    for (; next_span < aligned.size() && aligned[next_span].tokens.begin < stop; ++next_span) {
      const AlignedSpan& a = aligned[next_span];
      if (a.tokens.end > stop) continue;
      ex.spans.push_back({{a.tokens.begin - start + 1, a.tokens.end - start + 1},
                          article.spans[a.span_index].type_tag});
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::size_t corruption_budget(double ratio, std::size_t non_special) {
  return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(non_special) - 1e-9));
}

namespace {

struct DrawState {
  std::vector<std::size_t> free;        // positions
  std::vector<std::size_t> span_order;  // indices into spans
  std::size_t non_special = 0;
};

DrawState initial_candidates(std::span<const TokenId> ids, std::span<const TokenSpan> spans,
                             std::span<const std::uint8_t> exclude) {
  std::vector<std::uint8_t> in_span(ids.size(), 0);
  std::size_t prev_end = 0;
  for (const TokenSpan& s : spans) {
    if (s.range.begin >= s.range.end || s.range.end > ids.size() || s.range.begin < prev_end) {
      throw std::invalid_argument("token spans must be non-empty, sorted, non-overlapping and within the sequence");
    }
    for (std::size_t i = s.range.begin; i < s.range.end; ++i) {
      if (Vocabulary::is_special(ids[i])) throw std::invalid_argument("token span covers a special token");
      in_span[i] = 1;
    }
    prev_end = s.range.end;
  }
  DrawState st;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (Vocabulary::is_special(ids[i])) continue;
    ++st.non_special;
    if (!in_span[i] && (exclude.empty() || !exclude[i])) st.free.push_back(i);
  }
  if (st.non_special < 2) throw std::invalid_argument("sequence has fewer than 2 non-special tokens");
  st.span_order.resize(spans.size());
  for (std::size_t k = 0; k < spans.size(); ++k) st.span_order[k] = k;
  return st;
}

enum class DrawKind { kSpan, kSubword, kNone };

struct Draw {
  DrawKind kind = DrawKind::kNone;
  std::size_t index = 0;  // span index or token position
};

Draw next_draw(Rng& rng, double span_choice_prob, DrawState& st) {
  const bool want_span = rng.uniform01() < span_choice_prob;
  auto take = [&rng](std::vector<std::size_t>& v) {
    const auto k = static_cast<std::size_t>(rng.below(v.size()));
    const std::size_t value = v[k];
    v.erase(v.begin() + static_cast<std::ptrdiff_t>(k));
    return value;
  };
  if (want_span && !st.span_order.empty()) return {DrawKind::kSpan, take(st.span_order)};
  if (!st.free.empty()) return {DrawKind::kSubword, take(st.free)};
  if (!st.span_order.empty()) return {DrawKind::kSpan, take(st.span_order)};
  return {};
}

const std::vector<TokenId>& variant(const PoolEntry& e, bool spaced) { return spaced ? e.spaced : e.bare; }

std::optional<std::vector<TokenId>> pick_replacement(Rng& rng, const std::vector<PoolEntry>& bucket,
                                                     std::span<const TokenId> original, bool spaced,
                                                     bool require_equal, std::size_t max_extra) {
  std::vector<const std::vector<TokenId>*> equal;
  std::vector<const std::vector<TokenId>*> fitting;
  for (const PoolEntry& e : bucket) {
    const auto& toks = variant(e, spaced);
    if (toks.empty() || std::equal(toks.begin(), toks.end(), original.begin(), original.end())) continue;
    if (toks.size() == original.size()) equal.push_back(&toks);
    if (toks.size() <= original.size() + max_extra) fitting.push_back(&toks);
  }
  const auto& candidates = !equal.empty() || require_equal ? equal : fitting;
  if (candidates.empty()) return std::nullopt;
  return *candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
}

}  // namespace

GenExample k_mask(std::span<const TokenId> ids, std::span<const TokenSpan> spans, const MaskConfig& cfg,
                  std::uint64_t epoch, std::uint64_t example_id) {
  cfg.validate();
  DrawState st = initial_candidates(ids, spans, {});
  const std::size_t budget = corruption_budget(cfg.mask_ratio, st.non_special);

  GenExample ex;
  ex.target_ids.assign(ids.begin(), ids.end());
  ex.input_ids = ex.target_ids;
  ex.mask_flags.assign(ids.size(), 0);

  Rng rng(epoch_seed(cfg.seed ^ kMaskStream, epoch, example_id));
  std::size_t masked = 0;
  while (masked < budget) {
    const Draw d = next_draw(rng, cfg.span_choice_prob, st);
    if (d.kind == DrawKind::kNone) break;
    TokenRange r = d.kind == DrawKind::kSpan ? spans[d.index].range : TokenRange{d.index, d.index + 1};
    for (std::size_t i = r.begin; i < r.end; ++i) {
      ex.input_ids[i] = Specials::kMask;
      ex.mask_flags[i] = 1;
    }
    masked += r.size();
  }
  return ex;
}

ReplacementPool build_replacement_pool(std::span<const AnnotatedArticle> annotated, const Vocabulary& vocab) {
  std::map<std::string, std::set<std::string>> typed;
  std::set<std::string> any;
  for (const AnnotatedArticle& a : annotated) {
    for (const KnowledgeSpan& s : a.spans) {
      if (s.surface.empty()) continue;
      any.insert(s.surface);
      if (s.type_tag) typed[*s.type_tag].insert(s.surface);
    }
  }
  auto make = [&vocab](const std::string& surface) {
    return PoolEntry{surface, vocab.encode(surface).ids, vocab.encode(" " + surface).ids};
  };
  ReplacementPool pool;
  for (const std::string& s : any) pool.any.push_back(make(s));
  for (const auto& [tag, surfaces] : typed) {
    auto& bucket = pool.typed[tag];
    for (const std::string& s : surfaces) bucket.push_back(make(s));
  }
  return pool;
}

DiscExample k_replace(std::span<const TokenId> ids, std::span<const TokenSpan> spans, const ReplacementPool& pool,
                      const Vocabulary& vocab, const MaskConfig& cfg, std::uint64_t epoch, std::uint64_t example_id,
                      const ReplaceOptions& options) {
  cfg.validate();
  if (!spans.empty() && pool.any.empty()) throw std::invalid_argument("replacement pool is empty");
  if (!options.exclude_subwords.empty() && options.exclude_subwords.size() != ids.size()) {
    throw std::invalid_argument("exclude_subwords length differs from the sequence length");
  }
  if (vocab.size() <= static_cast<std::size_t>(kFirstByteToken)) throw std::invalid_argument("vocabulary too small");
  DrawState st = initial_candidates(ids, spans, options.exclude_subwords);
  const std::size_t budget = corruption_budget(cfg.mask_ratio, st.non_special);
  const std::uint64_t n_regular = vocab.size() - static_cast<std::size_t>(kFirstByteToken);

  // Plan against original positions, then materialize left to right.
  std::vector<std::optional<TokenId>> subword(ids.size());
  std::map<std::size_t, std::vector<TokenId>> span_fill;  // span begin -> replacement
  std::size_t out_len = ids.size();

  Rng rng(epoch_seed(cfg.seed ^ kReplaceStream, epoch, example_id));
  std::size_t replaced = 0;
  while (replaced < budget) {
    const Draw d = next_draw(rng, cfg.span_choice_prob, st);
    if (d.kind == DrawKind::kNone) break;
    if (d.kind == DrawKind::kSubword) {
      subword[d.index] = static_cast<TokenId>(kFirstByteToken + static_cast<TokenId>(rng.below(n_regular)));
      ++replaced;
      continue;
    }
    const TokenSpan& span = spans[d.index];
    const auto original = ids.subspan(span.range.begin, span.range.size());
    const std::string& first = vocab.token_bytes(original.front());
    const bool spaced = !first.empty() && first.front() == ' ';
    const std::size_t max_extra =
        options.max_len == 0 ? std::size_t(-1) : (options.max_len > out_len ? options.max_len - out_len : 0);
    std::optional<std::vector<TokenId>> fill;
    if (span.type_tag) {
      if (auto it = pool.typed.find(*span.type_tag); it != pool.typed.end()) {
        fill = pick_replacement(rng, it->second, original, spaced, options.require_equal_length, max_extra);
      }
    }
    if (!fill) fill = pick_replacement(rng, pool.any, original, spaced, options.require_equal_length, max_extra);
    if (!fill) continue;
    out_len = out_len + fill->size() - original.size();
    span_fill.emplace(span.range.begin, std::move(*fill));
    replaced += span.range.size();
  }

  DiscExample ex;
  ex.input_ids.reserve(out_len);
  ex.labels.reserve(out_len);
  ex.origin_ids.reserve(out_len);
  std::size_t span_idx = 0;
  for (std::size_t i = 0; i < ids.size();) {
    while (span_idx < spans.size() && spans[span_idx].range.begin < i) ++span_idx;
    auto it = span_fill.find(i);
    if (it != span_fill.end()) {
      const TokenRange r = spans[span_idx].range;
      const bool aligned = it->second.size() == r.size();
      const std::size_t out_begin = ex.input_ids.size();
      for (std::size_t k = 0; k < it->second.size(); ++k) {
        ex.input_ids.push_back(it->second[k]);
        ex.labels.push_back(1);
        ex.origin_ids.push_back(aligned ? ids[r.begin + k] : TokenId{-1});
      }
      ex.replaced_regions.push_back({out_begin, ex.input_ids.size()});
      ex.replaced_spans.push_back(r);
      i = r.end;
      continue;
    }
    if (subword[i]) ex.subword_positions.push_back(ex.input_ids.size());
    const TokenId tok = subword[i].value_or(ids[i]);
    ex.input_ids.push_back(tok);
    ex.labels.push_back(tok != ids[i] ? 1 : 0);
    ex.origin_ids.push_back(ids[i]);
    ++i;
  }
  return ex;
}

}  // namespace spanlm
