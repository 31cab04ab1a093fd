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

#include "spanlm/wiki_corpus.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "spanlm/error.hpp"

namespace spanlm {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kAnchor:
      return "anchor";
    case Provenance::kTwoHop:
      return "2hop";
    case Provenance::kAlias:
      return "alias";
  }
  return "anchor";
}

Provenance parse_provenance(std::string_view name) {
  if (name == "anchor") return Provenance::kAnchor;
  if (name == "2hop") return Provenance::kTwoHop;
  if (name == "alias") return Provenance::kAlias;
  throw std::invalid_argument("unknown span source '" + std::string(name) + "'");
}

namespace {

const json& field(const json& j, const char* key, json::value_t type, const char* type_name) {
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field \"") + key + "\"");
  const bool ok = it->type() == type ||
                  (type == json::value_t::number_integer && it->type() == json::value_t::number_unsigned);
  if (!ok) throw std::invalid_argument(std::string("field \"") + key + "\" must be " + type_name);
  return *it;
}

std::size_t offset_field(const json& j, const char* key) {
  const json& v = field(j, key, json::value_t::number_integer, "an integer");
  const auto value = v.get<std::int64_t>();
  if (value < 0) throw std::invalid_argument(std::string("field \"") + key + "\" is negative");
  return static_cast<std::size_t>(value);
}

json parse_record(std::string_view line) {
  if (!is_valid_utf8(line)) throw std::invalid_argument("invalid UTF-8");
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
}

Article article_from_json(const json& j) {
  Article a;
  a.id = field(j, "id", json::value_t::string, "a string").get<std::string>();
  a.title = field(j, "title", json::value_t::string, "a string").get<std::string>();
  a.text = field(j, "text", json::value_t::string, "a string").get<std::string>();
  if (a.id.empty()) throw std::invalid_argument("empty article id");
  const json& links = field(j, "links", json::value_t::array, "an array");
  for (const json& l : links) {
    if (!l.is_object()) throw std::invalid_argument("link is not an object");
    AnchorLink link;
    link.range.begin = offset_field(l, "start");
    link.range.end = offset_field(l, "end");
    link.target_title = field(l, "target", json::value_t::string, "a string").get<std::string>();
    if (link.range.begin >= link.range.end) throw std::invalid_argument("link has start >= end");
    if (link.range.end > a.text.size()) throw std::invalid_argument("link range extends past the text");
    if (link.target_title.empty()) throw std::invalid_argument("link target is empty");
    link.surface = a.text.substr(link.range.begin, link.range.size());
    a.links.push_back(std::move(link));
  }
  return a;
}

bool at_left_boundary(std::string_view text, std::size_t i) {
  return i == 0 || !is_word_byte(text[i - 1]) || !is_word_byte(text[i]);
}

bool at_right_boundary(std::string_view text, std::size_t end) {
  return end == text.size() || !is_word_byte(text[end - 1]) || !is_word_byte(text[end]);
}

}  // namespace

Article parse_article(std::string_view line) { return article_from_json(parse_record(line)); }

DumpReader::DumpReader(const std::filesystem::path& path, bool strict)
    : path_(path), in_(path, std::ios::binary), strict_(strict) {
  if (!in_) throw DataError("cannot open dump " + path.string());
}

std::optional<Article> DumpReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      return parse_article(line);
    } catch (const std::invalid_argument& e) {
      if (strict_) throw DataError(path_.string(), line_no_, e.what());
      issues_.push_back({line_no_, e.what()});
    }
  }
  if (in_.bad()) throw DataError("read error on " + path_.string());
  return std::nullopt;
}

std::vector<Article> read_dump(const std::filesystem::path& path, bool strict, std::vector<LineIssue>* issues) {
  DumpReader reader(path, strict);
  std::vector<Article> out;
  while (auto a = reader.next()) out.push_back(std::move(*a));
  if (issues) *issues = reader.issues();
  return out;
}

AliasTable read_alias_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open alias table " + path.string());
  AliasTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = parse_record(line);
      const std::string surface = field(j, "surface", json::value_t::string, "a string").get<std::string>();
      AliasRecord rec;
      for (const json& a : field(j, "aliases", json::value_t::array, "an array")) {
        if (!a.is_string()) throw std::invalid_argument("aliases must be strings");
        if (!a.get<std::string>().empty()) rec.aliases.push_back(a.get<std::string>());
      }
      if (auto t = j.find("type"); t != j.end() && !t->is_null()) {
        if (!t->is_string()) throw std::invalid_argument("field \"type\" must be a string or null");
        rec.type_tag = t->get<std::string>();
      }
      auto [it, inserted] = table.emplace(surface, rec);
      if (!inserted) {
        // Repeated surface: merge alias lists, first type wins.
        for (auto& a : rec.aliases) it->second.aliases.push_back(std::move(a));
        if (!it->second.type_tag) it->second.type_tag = rec.type_tag;
      }
    } catch (const std::invalid_argument& e) {
      throw DataError(path.string(), line_no, e.what());
    }
  }
  return table;
}

SpanLexicon build_lexicon(std::span<const Article> articles, const AliasTable* alias_table,
                          const LexiconOptions& options) {
  // Pass 1: global indexes.
  std::unordered_map<std::string, std::size_t> by_id;
  std::unordered_map<std::string, std::size_t> by_title;
  for (std::size_t i = 0; i < articles.size(); ++i) {
    if (!by_id.emplace(articles[i].id, i).second) throw DataError("duplicate article id '" + articles[i].id + "'");
    by_title.emplace(articles[i].title, i);
  }

  // Pass 2: per-article span sets.
  SpanLexicon lexicon;
  for (const Article& d : articles) {
    SurfaceSet s;
    for (const AnchorLink& l : d.links) s.emplace(l.surface, LexiconEntry{Provenance::kAnchor, std::nullopt});
    if (options.two_hop) {
      for (const AnchorLink& l : d.links) {
        auto it = by_title.find(l.target_title);
        if (it == by_title.end()) continue;
        for (const AnchorLink& l2 : articles[it->second].links) {
          s.emplace(l2.surface, LexiconEntry{Provenance::kTwoHop, std::nullopt});
        }
      }
    }
    if (options.aliases && alias_table) {
      std::vector<std::string> base;
      base.reserve(s.size());
      for (const auto& [surface, entry] : s) base.push_back(surface);
      for (const std::string& surface : base) {
        auto rec = alias_table->find(surface);
        if (rec == alias_table->end()) continue;
        LexiconEntry& origin = s.at(surface);
        if (!origin.type_tag) origin.type_tag = rec->second.type_tag;
        for (const std::string& alias : rec->second.aliases) {
          s.emplace(alias, LexiconEntry{Provenance::kAlias, rec->second.type_tag});
        }
      }
    }
    lexicon.by_article.emplace(d.id, std::move(s));
  }
  return lexicon;
}

AnnotatedArticle match_spans(const Article& article, const SurfaceSet& surfaces) {
  const std::string_view text = article.text;
  const std::size_t n = text.size();

  std::vector<ByteRange> anchors;
  for (const AnchorLink& l : article.links) anchors.push_back(l.range);
  std::sort(anchors.begin(), anchors.end(), [](const ByteRange& a, const ByteRange& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end > b.end;
  });
  {
    std::vector<ByteRange> kept;
    for (const ByteRange& r : anchors) {
      if (kept.empty() || r.begin >= kept.back().end) kept.push_back(r);
    }
    anchors = std::move(kept);
  }

  std::map<std::size_t, std::unordered_set<std::string_view>, std::greater<>> by_length;
  for (const auto& [surface, entry] : surfaces) {
    if (!surface.empty()) by_length[surface.size()].insert(surface);
  }

  AnnotatedArticle out;
  out.article = article;
  auto emit = [&](ByteRange r) {
    KnowledgeSpan span;
    span.range = r;
    span.surface = std::string(text.substr(r.begin, r.size()));
    const bool is_anchor = std::binary_search(anchors.begin(), anchors.end(), r, [](const ByteRange& a, const ByteRange& b) {
      return a.begin != b.begin ? a.begin < b.begin : a.end > b.end;
    });
    auto it = surfaces.find(span.surface);
    span.provenance = is_anchor || it == surfaces.end() ? Provenance::kAnchor : it->second.provenance;
    if (it != surfaces.end()) span.type_tag = it->second.type_tag;
    out.spans.push_back(std::move(span));
  };

  std::size_t next_anchor = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t best = 0;
    if (at_left_boundary(text, i)) {
      for (const auto& [len, set] : by_length) {
        if (len > n - i) continue;
        const std::size_t end = i + len;
        if (!set.contains(text.substr(i, len)) || !at_right_boundary(text, end)) continue;
        bool cuts_anchor = false;
        for (std::size_t a = next_anchor; a < anchors.size() && anchors[a].begin < end; ++a) {
          if (anchors[a].end > end) {
            cuts_anchor = true;
            break;
          }
        }
        if (cuts_anchor) continue;
        best = len;
        break;
      }
    }
    const bool anchor_here = next_anchor < anchors.size() && anchors[next_anchor].begin == i;
    if (anchor_here && best < anchors[next_anchor].size()) {
      emit(anchors[next_anchor]);
      i = anchors[next_anchor].end;
      ++next_anchor;
    } else if (best > 0) {
      emit({i, i + best});
      i += best;
      while (next_anchor < anchors.size() && anchors[next_anchor].begin < i) ++next_anchor;
    } else {
      ++i;
    }
  }
  return out;
}

CorpusStats corpus_stats(std::span<const AnnotatedArticle> annotated) {
  CorpusStats st;
  for (const AnnotatedArticle& a : annotated) {
    ++st.articles;
    st.spans += a.spans.size();
    st.max_spans = std::max(st.max_spans, a.spans.size());
    for (const KnowledgeSpan& s : a.spans) ++st.spans_by_source[std::string(provenance_name(s.provenance))];
  }
  st.mean_spans = st.articles ? static_cast<double>(st.spans) / static_cast<double>(st.articles) : 0.0;
  return st;
}

std::string annotated_to_jsonl(const AnnotatedArticle& a) {
  ordered_json j;
  j["id"] = a.article.id;
  j["title"] = a.article.title;
  j["text"] = a.article.text;
  auto links = ordered_json::array();
  for (const AnchorLink& l : a.article.links) {
    ordered_json lj;
    lj["start"] = l.range.begin;
    lj["end"] = l.range.end;
    lj["target"] = l.target_title;
    links.push_back(std::move(lj));
  }
  j["links"] = std::move(links);
  auto spans = ordered_json::array();
  for (const KnowledgeSpan& s : a.spans) {
    ordered_json sj;
    sj["start"] = s.range.begin;
    sj["end"] = s.range.end;
    sj["surface"] = s.surface;
    sj["source"] = std::string(provenance_name(s.provenance));
    sj["type"] = s.type_tag ? ordered_json(*s.type_tag) : ordered_json(nullptr);
    spans.push_back(std::move(sj));
  }
  j["spans"] = std::move(spans);
  return j.dump();
}

AnnotatedArticle parse_annotated(std::string_view line) {
  const json j = parse_record(line);
  AnnotatedArticle a;
  a.article = article_from_json(j);
  std::size_t last_end = 0;
  for (const json& s : field(j, "spans", json::value_t::array, "an array")) {
    KnowledgeSpan span;
    span.range.begin = offset_field(s, "start");
    span.range.end = offset_field(s, "end");
    span.surface = field(s, "surface", json::value_t::string, "a string").get<std::string>();
    span.provenance = parse_provenance(field(s, "source", json::value_t::string, "a string").get<std::string>());
    if (auto t = s.find("type"); t != s.end() && !t->is_null()) span.type_tag = t->get<std::string>();
    if (span.range.begin >= span.range.end || span.range.end > a.article.text.size()) {
      throw std::invalid_argument("span range outside text");
    }
    if (a.article.text.compare(span.range.begin, span.range.size(), span.surface) != 0) {
      throw std::invalid_argument("span surface does not match text");
    }
    if (!a.spans.empty() && span.range.begin < last_end) throw std::invalid_argument("spans overlap or are unsorted");
    last_end = span.range.end;
    a.spans.push_back(std::move(span));
  }
  return a;
}

std::vector<AnnotatedArticle> read_annotated(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open annotated corpus " + path.string());
  std::vector<AnnotatedArticle> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_annotated(line));
    } catch (const std::exception& e) {
      throw DataError(path.string(), line_no, e.what());
    }
  }
  return out;
}

}  // namespace spanlm
