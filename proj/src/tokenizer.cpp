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

#include "spanlm/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "spanlm/error.hpp"

namespace spanlm {
namespace {

constexpr std::array<const char*, Specials::kCount> kSpecialNames = {"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"};
constexpr std::array<const char*, Specials::kCount> kSpecialKeys = {"pad", "cls", "sep", "mask", "unk"};
constexpr int kVocabFormatVersion = 1;

enum class CharClass { kSpace, kLetter, kDigit, kOther };

CharClass classify(char ch) {
  const auto c = static_cast<unsigned char>(ch);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return CharClass::kSpace;
  if (c >= '0' && c <= '9') return CharClass::kDigit;
  if (c >= 0x80 || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return CharClass::kLetter;
  return CharClass::kOther;
}

// Byte <-> printable code point table from GPT-2's bytes_to_unicode.
struct ByteTable {
  std::array<std::uint32_t, 256> to_cp{};
  std::unordered_map<std::uint32_t, unsigned char> from_cp;

  ByteTable() {
    std::array<bool, 256> direct{};
    for (int b = '!'; b <= '~'; ++b) direct[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
    std::uint32_t extra = 0;
    for (int b = 0; b < 256; ++b) {
      to_cp[b] = direct[b] ? static_cast<std::uint32_t>(b) : 256 + extra++;
      from_cp.emplace(to_cp[b], static_cast<unsigned char>(b));
    }
  }
};

const ByteTable& byte_table() {
  static const ByteTable table;
  return table;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

}  // namespace

std::string bytes_to_printable(std::string_view bytes) {
  const ByteTable& table = byte_table();
  std::string out;
  for (char ch : bytes) append_utf8(out, table.to_cp[static_cast<unsigned char>(ch)]);
  return out;
}

std::string printable_to_bytes(std::string_view printable) {
  const ByteTable& table = byte_table();
  std::string out;
  std::size_t i = 0;
  while (i < printable.size()) {
    const auto c = static_cast<unsigned char>(printable[i]);
    std::uint32_t cp;
    std::size_t len;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c & 0xE0) == 0xC0 && i + 1 < printable.size()) {
      cp = ((c & 0x1Fu) << 6) | (static_cast<unsigned char>(printable[i + 1]) & 0x3Fu);
      len = 2;
    } else if ((c & 0xF0) == 0xE0 && i + 2 < printable.size()) {
      cp = ((c & 0x0Fu) << 12) | ((static_cast<unsigned char>(printable[i + 1]) & 0x3Fu) << 6) |
           (static_cast<unsigned char>(printable[i + 2]) & 0x3Fu);
      len = 3;
    } else {
      throw DataError("vocabulary token is not valid printable UTF-8");
    }
    auto it = table.from_cp.find(cp);
    if (it == table.from_cp.end()) throw DataError("vocabulary token contains an unmapped code point");
    out += static_cast<char>(it->second);
    i += len;
  }
  return out;
}

std::vector<ByteRange> pretokenize(std::string_view text) {
  std::vector<ByteRange> chunks;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const std::size_t start = i;
    if (text[i] == ' ' && i + 1 < n && classify(text[i + 1]) != CharClass::kSpace) {
      ++i;  // leading space joins the following run
    } else if (classify(text[i]) == CharClass::kSpace) {
      std::size_t j = i;
      while (j < n && classify(text[j]) == CharClass::kSpace) ++j;
      if (j < n && text[j - 1] == ' ' && j - 1 > i) --j;
      chunks.push_back({i, j});
      i = j;
      continue;
    }
    const CharClass cls = classify(text[i]);
    while (i < n && classify(text[i]) == cls) ++i;
    chunks.push_back({start, i});
  }
  return chunks;
}

Vocabulary Vocabulary::from_merges(std::vector<Merge> merges) {
  Vocabulary v;
  for (const char* name : kSpecialNames) v.tokens_.emplace_back(name);
  for (int b = 0; b < 256; ++b) {
    v.tokens_.emplace_back(1, static_cast<char>(b));
    v.index_.emplace(v.tokens_.back(), static_cast<TokenId>(v.tokens_.size() - 1));
  }
  for (std::size_t rank = 0; rank < merges.size(); ++rank) {
    const auto& [left, right] = merges[rank];
    auto li = v.index_.find(left);
    auto ri = v.index_.find(right);
    if (li == v.index_.end() || ri == v.index_.end()) {
      throw DataError("merge " + std::to_string(rank) + " references a token not produced by earlier merges");
    }
    const std::string joined = left + right;
    TokenId id;
    if (auto it = v.index_.find(joined); it != v.index_.end()) {
      id = it->second;
    } else {
      v.tokens_.push_back(joined);
      id = static_cast<TokenId>(v.tokens_.size() - 1);
      v.index_.emplace(joined, id);
    }
    v.merge_table_.emplace(std::make_pair(li->second, ri->second), MergeResult{rank, id});
  }
  v.merges_ = std::move(merges);
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view bytes) const {
  for (TokenId s = 0; s < Specials::kCount; ++s) {
    if (bytes == kSpecialNames[static_cast<std::size_t>(s)]) return s;
  }
  auto it = index_.find(std::string(bytes));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::encode_chunk(std::string_view chunk, std::size_t base, Encoding& out) const {
  std::vector<TokenId> symbols;
  std::vector<ByteRange> ranges;
  symbols.reserve(chunk.size());
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    symbols.push_back(kFirstByteToken + static_cast<unsigned char>(chunk[i]));
    ranges.push_back({base + i, base + i + 1});
  }
  while (symbols.size() > 1) {
    std::size_t best_pos = symbols.size();
    MergeResult best{std::numeric_limits<std::size_t>::max(), 0};
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_table_.find({symbols[i], symbols[i + 1]});
      if (it != merge_table_.end() && it->second.rank < best.rank) {
        best = it->second;
        best_pos = i;
      }
    }
    if (best_pos == symbols.size()) break;
    symbols[best_pos] = best.token;
    ranges[best_pos].end = ranges[best_pos + 1].end;
    symbols.erase(symbols.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
    ranges.erase(ranges.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
  }
  out.ids.insert(out.ids.end(), symbols.begin(), symbols.end());
  out.offsets.insert(out.offsets.end(), ranges.begin(), ranges.end());
}

Encoding Vocabulary::encode(std::string_view text) const {
  Encoding enc;
  for (const ByteRange& chunk : pretokenize(text)) {
    encode_chunk(text.substr(chunk.begin, chunk.size()), chunk.begin, enc);
  }
  return enc;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw std::out_of_range("decode: token id " + std::to_string(id) + " outside vocabulary");
    }
    out += tokens_[static_cast<std::size_t>(id)];
  }
  return out;
}

namespace {

nlohmann::ordered_json vocab_document(const std::vector<Vocabulary::Merge>& merges) {
  nlohmann::ordered_json j;
  j["version"] = kVocabFormatVersion;
  nlohmann::ordered_json specials;
  for (std::size_t s = 0; s < kSpecialKeys.size(); ++s) specials[kSpecialKeys[s]] = s;
  j["specials"] = specials;
  auto list = nlohmann::ordered_json::array();
  for (const auto& [l, r] : merges) list.push_back({bytes_to_printable(l), bytes_to_printable(r)});
  j["merges"] = list;
  return j;
}

}  // namespace

nlohmann::json Vocabulary::to_json() const { return nlohmann::json::parse(vocab_document(merges_).dump()); }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("version") || j["version"] != kVocabFormatVersion) {
    throw DataError("vocabulary: unsupported or missing version (expected " + std::to_string(kVocabFormatVersion) + ")");
  }
  if (j.contains("specials")) {
    const auto& sp = j["specials"];
    for (std::size_t s = 0; s < kSpecialKeys.size(); ++s) {
      if (!sp.contains(kSpecialKeys[s]) || sp[kSpecialKeys[s]] != s) {
        throw DataError(std::string("vocabulary: special token '") + kSpecialKeys[s] + "' must have id " +
                        std::to_string(s));
      }
    }
  }
  std::vector<Merge> merges;
  for (const auto& m : j.at("merges")) {
    if (!m.is_array() || m.size() != 2) throw DataError("vocabulary: each merge must be a [left, right] pair");
    merges.emplace_back(printable_to_bytes(m[0].get<std::string>()), printable_to_bytes(m[1].get<std::string>()));
  }
  return from_merges(std::move(merges));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary to " + path.string());
  out << vocab_document(merges_).dump() << "\n";
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

Vocabulary train_bpe(std::span<const std::string> corpus, const BpeTrainOptions& options) {
  const std::size_t floor = 256 + Specials::kCount;
  if (options.vocab_size <= floor) {
    throw std::invalid_argument("train_bpe: vocab_size " + std::to_string(options.vocab_size) + " must exceed " +
                                std::to_string(floor) + " (256 bytes + specials)");
  }
  std::map<std::string, std::int64_t> chunk_counts;
  for (const std::string& text : corpus) {
    for (const ByteRange& r : pretokenize(text)) ++chunk_counts[text.substr(r.begin, r.size())];
  }
  if (chunk_counts.empty()) throw std::invalid_argument("train_bpe: empty corpus");

  // Work on token strings directly; ids are assigned by from_merges later.
  struct Word {
    std::vector<std::string> symbols;
    std::int64_t count;
  };
  std::vector<Word> words;
  words.reserve(chunk_counts.size());
  for (const auto& [chunk, count] : chunk_counts) {
    Word w{{}, count};
    for (char ch : chunk) w.symbols.emplace_back(1, ch);
    words.push_back(std::move(w));
  }

  std::vector<Vocabulary::Merge> merges;
  std::unordered_map<std::string, bool> known;
  for (int b = 0; b < 256; ++b) known.emplace(std::string(1, static_cast<char>(b)), true);
  std::size_t vocab = floor;

  while (vocab < options.vocab_size) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pair_counts;
    for (const Word& w : words) {
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) pair_counts[{w.symbols[i], w.symbols[i + 1]}] += w.count;
    }
    // std::map iterates in lexicographic order, so the first maximum found
    // is the tie-break winner.
    const std::pair<std::string, std::string>* best = nullptr;
    std::int64_t best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best_count = count;
        best = &pair;
      }
    }
    if (best == nullptr || best_count < static_cast<std::int64_t>(options.min_pair_count)) break;
    const auto [left, right] = *best;
    const std::string joined = left + right;
    merges.emplace_back(left, right);
    if (known.emplace(joined, true).second) ++vocab;
    for (Word& w : words) {
      std::vector<std::string> merged;
      merged.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
          merged.push_back(joined);
          ++i;
        } else {
          merged.push_back(std::move(w.symbols[i]));
        }
      }
      w.symbols = std::move(merged);
    }
  }
  return Vocabulary::from_merges(std::move(merges));
}

std::vector<AlignedSpan> align_spans(const Encoding& encoding, std::span<const ByteRange> spans) {
  const auto& off = encoding.offsets;
  const std::size_t text_end = off.empty() ? 0 : off.back().end;
  std::vector<AlignedSpan> out;
  std::size_t last_end = 0;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const ByteRange& s = spans[k];
    if (s.begin >= s.end || s.end > text_end) {
      throw std::out_of_range("align_spans: span [" + std::to_string(s.begin) + "," + std::to_string(s.end) +
                              ") outside encoded text of " + std::to_string(text_end) + " bytes");
    }
    auto first = std::upper_bound(off.begin(), off.end(), s.begin,
                                  [](std::size_t pos, const ByteRange& r) { return pos < r.end; });
    auto last = std::lower_bound(off.begin(), off.end(), s.end,
                                 [](const ByteRange& r, std::size_t pos) { return r.begin < pos; });
    TokenRange range{static_cast<std::size_t>(first - off.begin()), static_cast<std::size_t>(last - off.begin())};
    if (!out.empty() && range.begin < last_end) continue;
    out.push_back({k, range});
    last_end = range.end;
  }
  return out;
}

}  // namespace spanlm
