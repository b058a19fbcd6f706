"""Tokenisation, sentence splitting, SQuAD ingestion and answer alignment."""

from __future__ import annotations

import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

DEFAULT_ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e",
    "inc", "ltd", "co", "corp", "mt", "gen", "gov", "sen", "rep", "rev", "col", "lt",
    "sgt", "capt", "fig", "approx", "dept", "est", "jan", "feb", "mar", "apr", "aug",
    "sep", "sept", "oct", "nov", "dec",
})
TERMINALS = frozenset({".", "!", "?"})
CLOSERS = frozenset({'"', "'", ")", "]", "}", "”", "’", "»"})


class DataError(ValueError):
    """Unusable input data (malformed file, unalignable answer, ...)."""


class AlignmentError(DataError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


class AnswerTuple(NamedTuple):
    """(sentence, start word, end word), 0-based, end inclusive."""

    sentence: int
    start: int
    end: int


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> tuple[list[str], list[int]]:
    """Split on whitespace, then peel leading/trailing punctuation into single tokens.

    Returns the tokens and their character offsets into ``text``.
    """
    tokens: list[str] = []
    offsets: list[int] = []
    for m in re.finditer(r"\S+", text):
        chunk, base = m.group(), m.start()
        lo, hi = 0, len(chunk)
        while lo < hi and _is_punct(chunk[lo]):
            lo += 1
        while hi > lo and _is_punct(chunk[hi - 1]):
            hi -= 1
        for p in range(lo):
            tokens.append(chunk[p])
            offsets.append(base + p)
        if hi > lo:
            tokens.append(chunk[lo:hi])
            offsets.append(base + lo)
        for p in range(hi, len(chunk)):
            tokens.append(chunk[p])
            offsets.append(base + p)
    return tokens, offsets


def split_sentences(tokens: list[str],
                    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> list[int]:
    """Return exclusive end indices of each sentence.

    A sentence ends after ``.``, ``!`` or ``?`` (plus any closing quotes or
    brackets) unless the next token starts lowercase or the period follows
    a known abbreviation.
    """
    if not tokens:
        return []
    bounds = []
    n = len(tokens)
    t = 0
    while t < n:
        tok = tokens[t]
        if tok in TERMINALS:
            end = t + 1
            while end < n and (tokens[end] in TERMINALS or tokens[end] in CLOSERS):
                end += 1
            nxt = tokens[end] if end < n else None
            abbrev = tok == "." and t > 0 and tokens[t - 1].lower() in abbreviations
            if nxt is None or (not abbrev and not nxt[:1].islower()):
                bounds.append(end)
            t = end
            continue
        t += 1
    if not bounds or bounds[-1] != n:
        bounds.append(n)
    return bounds


@dataclass
class TokenizedDocument:
    text: str
    sentences: list[list[str]]
    offsets: list[list[int]]

    @classmethod
    def from_text(cls, text: str,
                  abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> "TokenizedDocument":
        tokens, offsets = tokenize(text)
        sents, offs, lo = [], [], 0
        for hi in split_sentences(tokens, abbreviations):
            sents.append(tokens[lo:hi])
            offs.append(offsets[lo:hi])
            lo = hi
        return cls(text, sents, offs)

    @property
    def lengths(self) -> list[int]:
        return [len(s) for s in self.sentences]

    @property
    def tokens(self) -> list[str]:
        return [t for s in self.sentences for t in s]

    @property
    def flat_offsets(self) -> list[int]:
        return [o for s in self.offsets for o in s]

    def __len__(self) -> int:
        return sum(self.lengths)

    def flat_index(self, sentence: int, word: int) -> int:
        return sum(self.lengths[:sentence]) + word

    def char_span(self, answer: AnswerTuple) -> tuple[int, int]:
        i, j, k = answer
        return self.offsets[i][j], self.offsets[i][k] + len(self.sentences[i][k])

    def span_text(self, answer: AnswerTuple) -> str:
        lo, hi = self.char_span(answer)
        return self.text[lo:hi]

    def validate(self) -> None:
        prev = -1
        for sent, offs in zip(self.sentences, self.offsets):
            if not sent:
                raise DataError("empty sentence")
            for tok, off in zip(sent, offs):
                if not tok or off <= prev or self.text[off: off + len(tok)] != tok:
                    raise DataError(f"bad token {tok!r} at offset {off}")
                prev = off


@dataclass
class QAExample:
    id: str
    document: TokenizedDocument
    question: str
    question_tokens: list[str]
    question_offsets: list[int]
    answer_text: str | None = None
    answer_start: int | None = None
    answer: AnswerTuple | None = None
    answers: list[str] = field(default_factory=list)

    @classmethod
    def build(cls, id: str, context: str, question: str, answer_text: str | None = None,
              answer_start: int | None = None, answers: list[str] | None = None) -> "QAExample":
        doc = TokenizedDocument.from_text(context)
        q_tokens, q_offsets = tokenize(question)
        tup = None
        if answer_text is not None:
            if answer_start is None:
                answer_start = context.find(answer_text)
                if answer_start < 0:
                    raise AlignmentError("text-mismatch", f"{answer_text!r} not in context")
            tup = align_answer(doc, answer_text, answer_start)
        golds = list(answers) if answers else ([answer_text] if answer_text is not None else [])
        return cls(id, doc, question, q_tokens, q_offsets, answer_text, answer_start, tup, golds)

    def validate(self) -> None:
        """Check the invariants instead of trusting the loader."""
        self.document.validate()
        if not self.question_tokens:
            raise DataError(f"{self.id}: empty question")
        if self.answer is None:
            return
        i, j, k = self.answer
        if not (0 <= i < len(self.document.sentences) and 0 <= j <= k < self.document.lengths[i]):
            raise DataError(f"{self.id}: answer {tuple(self.answer)} out of bounds")
        # tolerant alignment may widen a mid-token answer to the covering tokens
        if _squash(self.answer_text.strip()) not in _squash(self.document.span_text(self.answer)):
            raise DataError(f"{self.id}: span {self.document.span_text(self.answer)!r} "
                            f"does not cover answer {self.answer_text!r}")

    def to_json(self) -> dict:
        return {
            "id": self.id, "context": self.document.text, "question": self.question,
            "answer_text": self.answer_text, "answer_start": self.answer_start,
            "answer": list(self.answer) if self.answer else None, "answers": self.answers,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QAExample":
        ex = cls.build(obj["id"], obj["context"], obj["question"], obj.get("answer_text"),
                       obj.get("answer_start"), obj.get("answers"))
        if obj.get("answer") is not None and tuple(obj["answer"]) != tuple(ex.answer):
            raise DataError(f"{ex.id}: cached answer {obj['answer']} != realigned {ex.answer}")
        return ex


def _squash(text: str) -> str:
    return " ".join(text.split())


def align_answer(doc: TokenizedDocument, answer_text: str, answer_start: int) -> AnswerTuple:
    """Map a character-level answer onto the covering (sentence, start, end) tokens."""
    stripped = answer_text.strip()
    if not stripped:
        raise AlignmentError("empty-answer")
    start = answer_start + (len(answer_text) - len(answer_text.lstrip()))
    end = start + len(stripped)
    if start < 0 or end > len(doc.text):
        raise AlignmentError("out-of-bounds", f"[{start}, {end}) in text of {len(doc.text)}")
    if _squash(doc.text[start:end]) != _squash(stripped):
        raise AlignmentError("text-mismatch", f"{doc.text[start:end]!r} != {stripped!r}")
    covered = []
    for i, (sent, offs) in enumerate(zip(doc.sentences, doc.offsets)):
        for j, (tok, off) in enumerate(zip(sent, offs)):
            if off < end and off + len(tok) > start:
                covered.append((i, j))
    if not covered:
        raise AlignmentError("no-covering-token")
    if covered[0][0] != covered[-1][0]:
        raise AlignmentError("cross-sentence")
    return AnswerTuple(covered[0][0], covered[0][1], covered[-1][1])


@dataclass
class IngestionReport:
    loaded: int = 0
    dropped: int = 0
    reasons: Counter = field(default_factory=Counter)

    def to_json(self) -> str:
        return json.dumps({"loaded": self.loaded, "dropped": self.dropped,
                           "reasons": dict(sorted(self.reasons.items()))}, sort_keys=True)


def read_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def examples_from_squad(obj: dict, require_answers: bool = True
                        ) -> tuple[list[QAExample], IngestionReport]:
    report = IngestionReport()
    examples = []
    try:
        articles = obj["data"]
    except (KeyError, TypeError):
        raise DataError("SQuAD file has no 'data' list") from None
    for article in articles:
        for para in article["paragraphs"]:
            context = para["context"]
            doc = TokenizedDocument.from_text(context)
            q_cache = {}
            for qa in para["qas"]:
                answers = qa.get("answers") or []
                q = qa["question"]
                if q not in q_cache:
                    q_cache[q] = tokenize(q)
                q_tokens, q_offsets = q_cache[q]
                if not q_tokens:
                    report.dropped += 1
                    report.reasons["empty-question"] += 1
                    continue
                if not doc.sentences:
                    report.dropped += 1
                    report.reasons["empty-context"] += 1
                    continue
                if not answers:
                    if require_answers:
                        report.dropped += 1
                        report.reasons["no-answer"] += 1
                        continue
                    examples.append(QAExample(qa["id"], doc, q, q_tokens, q_offsets))
                    report.loaded += 1
                    continue
                first = answers[0]
                try:
                    tup = align_answer(doc, first["text"], int(first["answer_start"]))
                except AlignmentError as exc:
                    report.dropped += 1
                    report.reasons[exc.reason] += 1
                    continue
                ex = QAExample(qa["id"], doc, q, q_tokens, q_offsets, first["text"],
                               int(first["answer_start"]), tup, [a["text"] for a in answers])
                ex.validate()
                examples.append(ex)
                report.loaded += 1
    return examples, report


def load_squad(path: str | Path, require_answers: bool = True
               ) -> tuple[list[QAExample], IngestionReport]:
    """Load a SQuAD v1.1 file; unalignable answers are dropped and counted."""
    try:
        return examples_from_squad(read_json(path), require_answers)
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: not SQuAD v1.1 schema ({exc})") from exc


def to_squad(examples: list[QAExample], title: str = "gnr") -> dict:
    """One paragraph per example, in SQuAD v1.1 layout."""
    paragraphs = []
    for ex in examples:
        qa = {"id": ex.id, "question": ex.question, "answers": []}
        if ex.answer_text is not None:
            qa["answers"].append({"text": ex.answer_text, "answer_start": ex.answer_start})
        paragraphs.append({"context": ex.document.text, "qas": [qa]})
    return {"version": "1.1", "data": [{"title": title, "paragraphs": paragraphs}]}


def write_cache(examples: list[QAExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), sort_keys=True) + "\n")


def read_cache(path: str | Path) -> list[QAExample]:
    with open(path, encoding="utf-8") as fh:
        return [QAExample.from_json(json.loads(line)) for line in fh if line.strip()]
