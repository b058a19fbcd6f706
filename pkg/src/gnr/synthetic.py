"""Small templated QA tasks with a matching knowledge base and word vectors.

Each document is a few fact sentences about people, cities, organisations
and years; the question asks about one fact, so answering requires matching
the question's entity to the right sentence. With ``held_out`` the dev split
only uses person and city surfaces that never occur in training, while the
knowledge base lists every surface. ``spread`` sets how far entity vectors
scatter around their type centroid; larger values make held-out names harder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import WordVectorTable
from .rng import RngStream

FIRST = ["Ada", "Alan", "Grace", "Linus", "Marie", "Niels", "Emmy", "Kurt",
         "Rosa", "Ivan", "Lena", "Omar", "Sofia", "Hugo", "Mira", "Tariq"]
LAST = ["Lovelace", "Turing", "Hopper", "Pauling", "Curie", "Bohr", "Noether", "Godel",
        "Parks", "Petrov", "Berg", "Haddad", "Costa", "Weber", "Sato", "Khan"]
CITIES = ["Paris", "Lyon", "Oslo", "Lima", "Cairo", "Kyoto", "Quito", "Perth",
          "Dublin", "Porto", "Accra", "Hanoi", "Riga", "Bern", "Tunis", "Sucre"]
ORGS = ["Acme Labs", "Zenith Works", "Orbit Group", "Nimbus Labs", "Vertex Works", "Helix Group"]
YEARS = ["1901", "1925", "1948", "1963", "1977", "1989", "1994", "2007"]

# (sentence, [(question, answer slot)]), slots p=person c=city o=org y=year
TEMPLATES = [
    ("{p} was born in {c} .", [("Where was {p} born ?", "c"), ("Who was born in {c} ?", "p")]),
    ("{p} founded {o} in {y} .", [("Who founded {o} ?", "p"), ("When did {p} found {o} ?", "y")]),
    ("{p} lives in {c} .", [("Where does {p} live ?", "c")]),
]


@dataclass
class SyntheticTask:
    train: dict
    dev: dict
    kb_lines: list[str]
    vectors: WordVectorTable

    def write(self, directory: str | Path) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"train": d / "train.json", "dev": d / "dev.json", "kb": d / "kb.tsv",
                 "vectors": d / "vectors.txt"}
        paths["train"].write_text(json.dumps(self.train, indent=1), encoding="utf-8")
        paths["dev"].write_text(json.dumps(self.dev, indent=1), encoding="utf-8")
        paths["kb"].write_text("# synthetic knowledge base\n" + "\n".join(self.kb_lines) + "\n",
                               encoding="utf-8")
        self.vectors.save(paths["vectors"])
        return paths


def _people(n: int) -> list[str]:
    return [f"{FIRST[i % len(FIRST)]} {LAST[(i * 7 + i // len(FIRST)) % len(LAST)]}"
            for i in range(n)]


def _example(qid: str, pools: dict[str, list[str]], rng: RngStream, n_sentences: int) -> dict:
    sentences, facts = [], []
    used = {k: set() for k in pools}
    for _ in range(n_sentences):
        tmpl, questions = TEMPLATES[rng.integers(0, len(TEMPLATES))]
        fill = {}
        for slot in "pcoy":
            if "{" + slot + "}" in tmpl:
                options = [x for x in pools[slot] if x not in used[slot]] or pools[slot]
                fill[slot] = rng.choice(options)
                used[slot].add(fill[slot])
        sentences.append((tmpl, fill))
        facts.append(questions)
    target = rng.integers(0, n_sentences)
    q_tmpl, slot = rng.choice(facts[target])
    tmpl, fill = sentences[target]
    context, answer_start = "", None
    for n, (t, f) in enumerate(sentences):
        text = t.format(**f)
        if n == target:
            # the answer is the first occurrence of the slot's filler in this sentence
            answer_start = len(context) + (len(context) > 0) + text.index(fill[slot])
        context = f"{context} {text}" if context else text
    return {"context": context, "qas": [{
        "id": qid, "question": q_tmpl.format(**fill),
        "answers": [{"text": fill[slot], "answer_start": answer_start}]}]}


def _squad(paragraphs: list[dict]) -> dict:
    return {"version": "1.1", "data": [{"title": "synthetic", "paragraphs": paragraphs}]}


def make_vectors(tokens: list[str], type_of: dict[str, str], dim: int, rng: RngStream,
                 spread: float = 0.5) -> WordVectorTable:
    """Random vectors; tokens of one entity type share a centroid."""
    centroids: dict[str, np.ndarray] = {}
    rows = []
    for tok in tokens:
        kind = type_of.get(tok)
        if kind is None:
            rows.append(rng.normal((dim,)))
            continue
        if kind not in centroids:
            centroids[kind] = rng.normal((dim,))
        rows.append(centroids[kind] + spread * rng.normal((dim,)))
    return WordVectorTable({t: i for i, t in enumerate(tokens)}, np.stack(rows))


def make_task(n_train: int, n_dev: int = 0, seed: int = 0, held_out: bool = False,
              n_people: int = 8, n_cities: int = 8, dim: int = 16,
              n_sentences: int = 3, spread: float = 0.5) -> SyntheticTask:
    rng = RngStream(seed)
    people = _people(2 * n_people if held_out else n_people)
    cities = CITIES[: 2 * n_cities if held_out else n_cities]
    train_pools = {"p": people[:n_people], "c": cities[:n_cities], "o": ORGS, "y": YEARS}
    dev_pools = dict(train_pools)
    if held_out:
        dev_pools.update(p=people[n_people:], c=cities[n_cities:])
    train = [_example(f"train-{n}", train_pools, rng, n_sentences) for n in range(n_train)]
    dev = [_example(f"dev-{n}", dev_pools, rng, n_sentences) for n in range(n_dev)]

    kb = [(p, "human") for p in people] + [(c, "city") for c in cities] + \
         [(o, "organization") for o in ORGS]
    type_of = {}
    for surface, kind in kb:
        for tok in surface.split():
            type_of.setdefault(tok, kind)
    words = {w for tmpl, qs in TEMPLATES for s in [tmpl] + [q for q, _ in qs]
             for w in s.split() if "{" not in w}
    vocab = sorted(words | set(type_of) | set(YEARS))
    vectors = make_vectors(vocab, type_of, dim, rng.spawn(1), spread)
    return SyntheticTask(_squad(train), _squad(dev), [f"{s}\t{k}" for s, k in kb], vectors)
