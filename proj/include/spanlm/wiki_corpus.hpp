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
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spanlm/text.hpp"

namespace spanlm {

struct AnchorLink {
  ByteRange range;
  std::string surface;  // text[range]
  std::string target_title;
};

struct Article {
  std::string id;
  std::string title;
  std::string text;
  std::vector<AnchorLink> links;
};

enum class Provenance { kAnchor, kTwoHop, kAlias };

// "anchor" | "2hop" | "alias"
std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view name);

struct LexiconEntry {
  Provenance provenance;
  std::optional<std::string> type_tag;
};

// Candidate surfaces of one article, keyed (and so deduplicated)
// case-sensitively by surface.
using SurfaceSet = std::map<std::string, LexiconEntry>;

struct SpanLexicon {
  std::map<std::string, SurfaceSet> by_article;  // article id -> S
};

struct KnowledgeSpan {
  ByteRange range;
  std::string surface;
  Provenance provenance;
  std::optional<std::string> type_tag;
};

struct AnnotatedArticle {
  Article article;
  std::vector<KnowledgeSpan> spans;  // sorted, non-overlapping
};

struct AliasRecord {
  std::vector<std::string> aliases;
  std::optional<std::string> type_tag;
};

using AliasTable = std::map<std::string, AliasRecord>;

// Malformed-line diagnostic collected in lenient mode.
struct LineIssue {
  std::size_t line;
  std::string message;
};

// Streams articles from a JSONL dump:
//   {"id": str, "title": str, "text": str,
//    "links": [{"start": int, "end": int, "target": str}]}
// Offsets are UTF-8 byte offsets. In strict mode the first malformed line
// throws DataError naming the file and line; otherwise it is recorded in
// issues() and skipped. Blank lines are ignored.
class DumpReader {
 public:
  DumpReader(const std::filesystem::path& path, bool strict);

  std::optional<Article> next();
  const std::vector<LineIssue>& issues() const { return issues_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  bool strict_;
  std::size_t line_no_ = 0;
  std::vector<LineIssue> issues_;
};

// Parses and validates one dump record. Throws std::invalid_argument with a
// description of the first problem found.
Article parse_article(std::string_view line);

std::vector<Article> read_dump(const std::filesystem::path& path, bool strict,
                               std::vector<LineIssue>* issues = nullptr);

// Alias table JSONL: {"surface": str, "aliases": [str], "type": str|null}.
AliasTable read_alias_table(const std::filesystem::path& path);

struct LexiconOptions {
  bool two_hop = true;
  bool aliases = true;
};

// Per article D: S = anchors of D, plus anchors of every dump article D
// links to (2-hop), plus alias-table aliases of any of those surfaces. An
// earlier stage's provenance wins when a surface arrives twice. type_tag
// comes from the alias-table record of the surface (or of the surface an
// alias was expanded from). Throws DataError on duplicate article ids.
SpanLexicon build_lexicon(std::span<const Article> articles, const AliasTable* alias_table,
                          const LexiconOptions& options = {});

// Greedy left-to-right longest match of `surfaces` at word boundaries.
// Anchor ranges of the article are always kept, either as-is or inside a
// longer match that fully contains them; no match may cut an anchor.
AnnotatedArticle match_spans(const Article& article, const SurfaceSet& surfaces);

struct CorpusStats {
  std::size_t articles = 0;
  std::size_t spans = 0;
  double mean_spans = 0.0;
  std::size_t max_spans = 0;
  std::map<std::string, std::size_t> spans_by_source;
};

CorpusStats corpus_stats(std::span<const AnnotatedArticle> annotated);

// Annotated JSONL: the input record plus
//   "spans": [{"start", "end", "surface", "source", "type"}].
std::string annotated_to_jsonl(const AnnotatedArticle& a);
AnnotatedArticle parse_annotated(std::string_view line);
std::vector<AnnotatedArticle> read_annotated(const std::filesystem::path& path);

}  // namespace spanlm
