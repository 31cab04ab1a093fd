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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>
#include <string>
#include <vector>

#include "spanlm/cli.hpp"
#include "spanlm/corruptor.hpp"
#include "spanlm/error.hpp"
#include "spanlm/evaluator.hpp"
#include "spanlm/tokenizer.hpp"
#include "spanlm/wiki_corpus.hpp"

namespace py = pybind11;

namespace spanlm {
namespace {

py::dict mask_to_dict(const GenExample& g) {
  py::dict d;
  d["input_ids"] = g.input_ids;
  d["target_ids"] = g.target_ids;
  d["mask_flags"] = std::vector<int>(g.mask_flags.begin(), g.mask_flags.end());
  return d;
}

std::vector<TokenSpan> to_spans(const std::vector<std::pair<std::size_t, std::size_t>>& ranges) {
  std::vector<TokenSpan> spans;
  for (const auto& [b, e] : ranges) spans.push_back({{b, e}, std::nullopt});
  return spans;
}

// Runs one CLI command in-process; returns (exit code, stdout, stderr).
py::tuple run(const std::vector<std::string>& args) {
  std::vector<std::string> argv{"spanlm"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::ostringstream out;
  std::ostringstream err;
  int code;
  {
    py::gil_scoped_release release;
    code = dispatch(argv, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace
}  // namespace spanlm

PYBIND11_MODULE(_core, m) {
  using namespace spanlm;
  m.doc() = "Knowledge-guided span language model: corpus, tokenizer, corruption and metrics";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("load", &Vocabulary::load, py::arg("path"))
      .def("__len__", &Vocabulary::size)
      .def(
          "encode", [](const Vocabulary& v, const std::string& text) { return v.encode(text).ids; }, py::arg("text"))
      .def(
          "offsets",
          [](const Vocabulary& v, const std::string& text) {
            std::vector<std::pair<std::size_t, std::size_t>> out;
            for (const ByteRange& r : v.encode(text).offsets) out.emplace_back(r.begin, r.end);
            return out;
          },
          py::arg("text"), "Byte offsets of each token in the UTF-8 text")
      .def(
          "decode",
          [](const Vocabulary& v, const std::vector<TokenId>& ids) { return py::bytes(v.decode(ids)); },
          py::arg("ids"), "Raw bytes; a slice of a multi-byte character is not valid UTF-8")
      .def_static("is_special", &Vocabulary::is_special, py::arg("id"));

  m.def(
      "extract_spans",
      [](const std::filesystem::path& dump, const std::optional<std::filesystem::path>& aliases) {
        const auto articles = read_dump(dump, true);
        std::optional<AliasTable> table;
        if (aliases) table = read_alias_table(*aliases);
        const SpanLexicon lex = build_lexicon(articles, table ? &*table : nullptr);
        std::vector<py::dict> out;
        for (const Article& a : articles) {
          const auto it = lex.by_article.find(a.id);
          const AnnotatedArticle ann = match_spans(a, it == lex.by_article.end() ? SurfaceSet{} : it->second);
          py::list spans;
          for (const KnowledgeSpan& s : ann.spans) {
            py::dict d;
            d["start"] = s.range.begin;
            d["end"] = s.range.end;
            d["surface"] = s.surface;
            d["source"] = std::string(provenance_name(s.provenance));
            d["type"] = s.type_tag ? py::object(py::str(*s.type_tag)) : py::object(py::none());
            spans.append(d);
          }
          py::dict d;
          d["id"] = a.id;
          d["title"] = a.title;
          d["spans"] = spans;
          out.push_back(d);
        }
        return out;
      },
      py::arg("dump"), py::arg("aliases") = py::none(), "Strict-mode span extraction; byte offsets into the text");

  m.def("corruption_budget", &corruption_budget, py::arg("ratio"), py::arg("non_special"));
  m.def(
      "k_mask",
      [](const std::vector<TokenId>& ids, const std::vector<std::pair<std::size_t, std::size_t>>& spans,
         double mask_ratio, double span_choice_prob, std::uint64_t seed, std::uint64_t epoch,
         std::uint64_t example_id) {
        const auto s = to_spans(spans);
        return mask_to_dict(k_mask(ids, s, MaskConfig{mask_ratio, span_choice_prob, seed}, epoch, example_id));
      },
      py::arg("ids"), py::arg("spans"), py::arg("mask_ratio") = 0.15, py::arg("span_choice_prob") = 0.5,
      py::arg("seed") = 0, py::arg("epoch") = 0, py::arg("example_id") = 0,
      "K-MASK over token ids with half-open token spans; raises ValueError on bad input");

  m.def("normalize_answer", &normalize_answer, py::arg("text"));
  m.def("token_f1", &token_f1, py::arg("prediction"), py::arg("gold"));
  m.def(
      "qa_metrics",
      [](const std::vector<std::string>& predictions, const std::vector<std::vector<std::string>>& golds) {
        const QaScores s = qa_metrics(predictions, golds);
        py::dict d;
        d["exact_match"] = s.exact_match;
        d["f1"] = s.f1;
        d["count"] = s.count;
        return d;
      },
      py::arg("predictions"), py::arg("golds"));

  m.def("run", &run, py::arg("args"), "Runs a CLI command in-process; returns (exit_code, stdout, stderr)");
}
