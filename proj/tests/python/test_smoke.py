# Copyright 2026 The spanlm Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Smoke tests for the Python bindings."""

import json
import os
from pathlib import Path

import pytest

import spanlm

FIXTURES = Path(os.environ.get("SPANLM_FIXTURES", Path(__file__).resolve().parents[1] / "fixtures"))


def test_corruption_budget():
    assert spanlm.corruption_budget(0.15, 100) == 15
    assert spanlm.corruption_budget(0.15, 20) == 3


def test_vocabulary_round_trip():
    vocab = spanlm.Vocabulary.load(FIXTURES / "corpus50" / "vocab.json")
    text = "Alder Voss was born in Zentharo."
    ids = vocab.encode(text)
    assert len(vocab) > 261
    assert vocab.decode(ids) == text.encode()
    offsets = vocab.offsets(text)
    assert len(offsets) == len(ids)
    assert offsets[0][0] == 0 and offsets[-1][1] == len(text.encode())
    assert not any(spanlm.Vocabulary.is_special(i) for i in ids)


def test_extract_spans_matches_golden():
    articles = spanlm.extract_spans(FIXTURES / "wiki5" / "dump.jsonl", FIXTURES / "wiki5" / "aliases.jsonl")
    golden = [json.loads(line) for line in (FIXTURES / "wiki5" / "golden.jsonl").read_text().splitlines()]
    assert [a["id"] for a in articles] == [g["id"] for g in golden]
    assert sum(len(a["spans"]) for a in articles) == 21
    for a, g in zip(articles, golden):
        assert [s["surface"] for s in a["spans"]] == [s["surface"] for s in g["spans"]]
        assert [s["source"] for s in a["spans"]] == [s["source"] for s in g["spans"]]
        assert [(s["start"], s["end"]) for s in a["spans"]] == [(s["start"], s["end"]) for s in g["spans"]]


def test_k_mask_budget_and_errors():
    ids = [1] + list(range(300, 320)) + [2]
    out = spanlm.k_mask(ids, [], seed=4)
    assert sum(out["mask_flags"]) == 3
    assert out["target_ids"] == ids
    masked = [i for i, f in enumerate(out["mask_flags"]) if f]
    assert all(out["input_ids"][i] == 3 for i in masked)
    spanned = spanlm.k_mask(ids, [(5, 9)], seed=0)
    assert spanned["mask_flags"][5:9] in ([0] * 4, [1] * 4)
    with pytest.raises(ValueError):
        spanlm.k_mask([1, 300, 2], [])


def test_qa_metrics_partial_overlap():
    scores = spanlm.qa_metrics(["Eiffel"], [["Eiffel Tower"]])
    assert scores["exact_match"] == 0.0
    assert scores["f1"] == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert spanlm.normalize_answer("The  Eiffel Tower!") == "eiffel tower"
    assert spanlm.token_f1("a b", "a b") == 1.0


def test_cli_exit_codes(tmp_path):
    code, out, _ = spanlm.run(["--help"])
    assert code == 0 and "pretrain" in out
    code, _, err = spanlm.run(["pretrain", "--config", str(tmp_path / "missing.cfg")])
    assert code == 2 and err
    code, _, _ = spanlm.run(["frobnicate"])
    assert code == 1
