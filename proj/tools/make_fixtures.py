# Copyright 2026 The spanlm Authors
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
"""Regenerates the synthetic fixture corpora under tests/fixtures.

The output is a pure function of this file. Annotated files and
vocabularies are derived from these dumps with the spanlm CLI, see
tests/fixtures/README.md.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

PEOPLE = [
    "Marta Velorn", "Ivo Castellan", "Renna Dahl", "Tobias Quill", "Lia Morrow",
    "Oskar Brandt", "Nadia Fenwick", "Pavel Strand", "Yara Holt", "Emil Corvin",
]
CITIES = ["Kestrel Harbor", "Dunmere", "Ashford Vale", "Port Sable", "Greywick", "Lowen", "Brightwater", "Calder Rock"]
ORGS = ["Norwin Tools", "Halcyon Press", "Bluefen Mills", "Orrin Aviation", "Tidewell Foods"]
RIVERS = ["Amber River", "Silt River", "Corran River"]
TYPES = {**{p: "PERSON" for p in PEOPLE}, **{c: "CITY" for c in CITIES}, **{o: "ORG" for o in ORGS},
         **{r: "RIVER" for r in RIVERS}}
ALIASES = {"Kestrel Harbor": ["Kestrel"], "Halcyon Press": ["Halcyon"], "Amber River": ["the Amber"]}


def write_jsonl(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def render(template, fillers):
    """Fills {0}, {1}, ... and returns text plus anchor links to the fillers."""
    text, links = "", []
    rest = template
    while "{" in rest:
        head, _, tail = rest.partition("{")
        idx, _, rest = tail.partition("}")
        text += head
        surface = fillers[int(idx)]
        start = len(text.encode("utf-8"))
        text += surface
        links.append({"start": start, "end": len(text.encode("utf-8")), "target": surface})
    return text + rest, links


def alias_records(surfaces, aliases):
    return [{"surface": s, "aliases": aliases.get(s, []), "type": TYPES.get(s)} for s in sorted(surfaces)]


def corpus50(rng):
    templates = [
        ("{0} was born in {1} and later worked for {2}.", (PEOPLE, CITIES, ORGS)),
        ("{0} lies on the {1} and hosts the offices of {2}.", (CITIES, RIVERS, ORGS)),
        ("{0} was founded in {1} by {2}.", (ORGS, CITIES, PEOPLE)),
        ("{0} studied the {1} near {2} for many years.", (PEOPLE, RIVERS, CITIES)),
        ("Ships from {0} carry goods made by {1} down the {2}.", (CITIES, ORGS, RIVERS)),
    ]
    entities = PEOPLE + CITIES + ORGS + RIVERS
    records = []
    # One article per entity, then chronicle articles, one sentence each.
    for i in range(50):
        tpl, pools = templates[i % len(templates)]
        if i < len(entities):
            title = entities[i]
            # First template, cycling from i, with a slot of the title's kind.
            for shift in range(len(templates)):
                tpl, pools = templates[(i + shift) % len(templates)]
                slot = next((k for k, pool in enumerate(pools) if title in pool), None)
                if slot is not None:
                    break
            fill = [rng.choice([e for e in pool if e != title]) for pool in pools]
            fill[slot] = title
        else:
            title = f"Chronicle {i - len(entities) + 1}"
            fill = [rng.choice(pool) for pool in pools]
        text, links = render(tpl, fill)
        # An article does not link to itself.
        links = [l for l in links if l["target"] != title]
        records.append({"id": f"c{i + 1:03d}", "title": title, "text": text, "links": links})
    write_jsonl(ROOT / "corpus50" / "dump.jsonl", records)
    write_jsonl(ROOT / "corpus50" / "aliases.jsonl", alias_records(entities, ALIASES))


FACT_PEOPLE = [
    "Alder Voss", "Brina Kestov", "Cato Imrie", "Delia Marchetti", "Ewan Solberg", "Fenna Ruhl",
    "Gideon Prax", "Hedda Lorne", "Isak Tormund", "Juno Petrakis", "Kasimir Ode", "Lorna Vesk",
    "Milo Ardent", "Nessa Quarrie", "Orla Bexley", "Piet Hanrahan", "Quinn Maddox", "Rosalind Tey",
    "Soren Ulvik", "Tamsin Groot", "Ulric Fane", "Vera Okonkwo", "Wendel Psaros", "Xenia Lund",
    "Yusuf Marrin",
]
FACT_CITIES = ["Quorvale", "Zentharo", "Mirefold", "Ostravik", "Pellucine", "Vantrosk"]
FACT_ORGS = ["Glimmerax Labs", "Torvendi Works", "Hollowmere Bank", "Quillstrand Media", "Brackenforge"]
FACT_RIVERS = ["Ysoldine River", "Karrowash River", "Thessary River", "Vellumar River"]
FACT_TOOLS = ["glockenharp", "tromvenelle", "zitherbox", "bassoonet", "marimbula"]
FACT_RELATIONS = [
    ("born_in", "{0} was born in {1} .", FACT_CITIES, "CITY"),
    ("works_for", "{0} works for {1} .", FACT_ORGS, "ORG"),
    ("lives_near", "{0} lives near the {1} .", FACT_RIVERS, "RIVER"),
    ("plays", "{0} plays the {1} .", FACT_TOOLS, "INSTRUMENT"),
]


def facts(rng):
    records, cloze, facts_by_person = [], [], {}
    n = 0
    for rel, tpl, pool, _ in FACT_RELATIONS:
        for k, person in enumerate(FACT_PEOPLE):
            obj = pool[(k * 7 + len(rel)) % len(pool)] if rng.random() < 0.5 else rng.choice(pool)
            text, links = render(tpl, [person, obj])
            n += 1
            records.append({"id": f"f{n:03d}", "title": f"Fact {n}", "text": text, "links": links})
            slot = tpl.replace("{0}", person).replace("{1}", "[MASK_SLOT]")
            cloze.append({"relation": rel, "sentence": slot, "answer": obj})
            facts_by_person.setdefault(person, {})[rel] = obj
    types = {p: "PERSON" for p in FACT_PEOPLE}
    for _, _, pool, tag in FACT_RELATIONS:
        types.update({o: tag for o in pool})
    write_jsonl(ROOT / "facts" / "dump.jsonl", records)
    write_jsonl(ROOT / "facts" / "aliases.jsonl",
                [{"surface": s, "aliases": [], "type": types[s]} for s in sorted(types)])
    write_jsonl(ROOT / "facts" / "cloze.jsonl", cloze)
    # 30-item probe fixture: a spread over relations in file order.
    write_jsonl(ROOT / "cloze30.jsonl", [cloze[i] for i in range(0, 100, 10)] +
                [cloze[i] for i in range(3, 100, 5)][:20])
    return facts_by_person


QUESTIONS = {
    "born_in": "Where was {0} born ?",
    "works_for": "Who does {0} work for ?",
    "lives_near": "Which river does {0} live near ?",
    "plays": "What instrument does {0} play ?",
}


def qa20(rng, facts_by_person):
    items = []
    people = FACT_PEOPLE[:20]
    for i, person in enumerate(people):
        rels = [r[0] for r in FACT_RELATIONS]
        asked = rels[i % 4]
        other = rels[(i + 1 + rng.randrange(3)) % 4]
        sentences = {r: t.replace("{0}", person).replace("{1}", facts_by_person[person][r])
                     for r, t, _, _ in FACT_RELATIONS}
        order = [asked, other] if i % 2 == 0 else [other, asked]
        items.append({
            "id": f"q{i + 1:02d}",
            "question": QUESTIONS[asked].replace("{0}", person),
            "context": " ".join(sentences[r] for r in order),
            "answers": [facts_by_person[person][asked]],
        })
    write_jsonl(ROOT / "qa20.jsonl", items)


def main():
    rng = random.Random(20261016)
    corpus50(rng)
    facts_by_person = facts(rng)
    qa20(rng, facts_by_person)


if __name__ == "__main__":
    main()
