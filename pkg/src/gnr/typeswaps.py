"""Type Swaps: knowledge-base driven entity replacement for data augmentation.

Entities are found by greedy longest match of KB surfaces over tokens, plus
pattern rules for numbers and dates. A swap replaces every distinct entity
surface with another surface of the same type, consistently across the
document and question, and keeps the example only if the question or the
answer changed.
"""

from __future__ import annotations

import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .dataio import AlignmentError, DataError, QAExample, tokenize
from .rng import RngStream

log = logging.getLogger(__name__)

MONTHS = ["January", "February", "March", "April", "May", "June", "July", "August",
          "September", "October", "November", "December"]
WEEKDAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]
ORDINAL_WORDS = ["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth",
                 "ninth", "tenth", "eleventh", "twelfth"]
UNITS = frozenset({
    "km", "kilometres", "kilometers", "kilometre", "kilometer", "m", "metres", "meters",
    "metre", "meter", "cm", "mm", "miles", "mile", "mi", "feet", "foot", "ft", "inches", "in",
    "kg", "kilograms", "g", "grams", "pounds", "lb", "lbs", "tons", "tonnes", "percent", "%",
    "years", "days", "hours", "minutes", "seconds", "km²", "acres", "hectares", "degrees",
    "mph", "km/h", "people", "million", "billion",
})
NUMBER_PREFIX = "number:"

_INT = re.compile(r"\d+")
_DEC = re.compile(r"(\d+)\.(\d+)")
_ORD = re.compile(r"(\d+)(st|nd|rd|th)")


class SwapRejected(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class AugmentationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# number types


def assign_number_type(tokens: Sequence[str]) -> str | None:
    """Classify a token span as a number kind, or None."""
    if len(tokens) == 2:
        first = assign_number_type(tokens[:1])
        if first in ("integer", "decimal", "year") and tokens[1] in UNITS:
            return "quantity"
        return None
    if len(tokens) != 1:
        return None
    tok = tokens[0]
    if _INT.fullmatch(tok):
        return "year" if len(tok) == 4 and 1000 <= int(tok) <= 2999 else "integer"
    if _DEC.fullmatch(tok):
        return "decimal"
    if tok in MONTHS:
        return "month"
    if tok in WEEKDAYS:
        return "weekday"
    if tok.lower() in ORDINAL_WORDS or _ORD.fullmatch(tok):
        return "ordinal"
    return None


def _ordinal_suffix(n: int) -> str:
    if 10 <= n % 100 <= 20:
        return "th"
    return {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")


def _int_range(digits: int, exclude_years: bool) -> list[tuple[int, int]]:
    """Inclusive ranges of integers with ``digits`` digits."""
    lo = 0 if digits == 1 else 10 ** (digits - 1)
    hi = 10 ** digits - 1
    if exclude_years and digits == 4:
        return [(3000, 9999)]
    return [(lo, hi)]


def _range_size(ranges) -> int:
    return sum(hi - lo + 1 for lo, hi in ranges)


def _draw(ranges, rng: RngStream) -> int:
    n = rng.integers(0, _range_size(ranges))
    for lo, hi in ranges:
        if n <= hi - lo:
            return lo + n
        n -= hi - lo + 1
    raise AssertionError("unreachable")


def _number_space(kind: str, surface: str) -> int:
    """Size of the value space a number surface is resampled from (original included)."""
    tok = surface.split()[0] if kind == "quantity" else surface
    if kind == "quantity":
        sub = assign_number_type([tok])
        return _number_space("integer" if sub == "year" else sub, tok)
    if kind == "year":
        return 2000
    if kind == "integer":
        return _range_size(_int_range(len(tok), exclude_years=True))
    if kind == "decimal":
        whole, frac = _DEC.fullmatch(tok).groups()
        return _range_size(_int_range(len(whole), False)) * 10 ** len(frac)
    if kind == "month":
        return len(MONTHS)
    if kind == "weekday":
        return len(WEEKDAYS)
    if kind == "ordinal":
        m = _ORD.fullmatch(tok)
        if m:
            return _range_size(_int_range(len(m.group(1)), False)) - (len(m.group(1)) == 1)
        return len(ORDINAL_WORDS)
    raise ValueError(f"unknown number kind {kind!r}")


def _sample_number_once(kind: str, surface: str, rng: RngStream) -> str:
    if kind == "quantity":
        # the number is the leading token; keep whatever follows verbatim
        m = re.match(r"\d+(?:\.\d+)?", surface)
        head, tail = m.group(), surface[m.end():]
        sub = assign_number_type([head])
        return _sample_number_once("integer" if sub == "year" else sub, head, rng) + tail
    if kind == "year":
        return str(rng.integers(1000, 3000))
    if kind == "integer":
        return str(_draw(_int_range(len(surface), exclude_years=True), rng))
    if kind == "decimal":
        whole, frac = _DEC.fullmatch(surface).groups()
        w = _draw(_int_range(len(whole), False), rng)
        f = rng.integers(0, 10 ** len(frac))
        return f"{w}.{f:0{len(frac)}d}"
    if kind == "month":
        return rng.choice(MONTHS)
    if kind == "weekday":
        return rng.choice(WEEKDAYS)
    if kind == "ordinal":
        m = _ORD.fullmatch(surface)
        if m:
            digits = len(m.group(1))
            ranges = [(1, 9)] if digits == 1 else _int_range(digits, False)
            n = _draw(ranges, rng)
            return f"{n}{_ordinal_suffix(n)}"
        word = rng.choice(ORDINAL_WORDS)
        return word.capitalize() if surface[:1].isupper() else word
    raise ValueError(f"unknown number kind {kind!r}")


def sample_number(kind: str, surface: str, rng: RngStream) -> str:
    """A fresh value of the same number kind, different from ``surface``."""
    for _ in range(1000):
        out = _sample_number_once(kind, surface, rng)
        if out != surface:
            return out
    raise SwapRejected("number-space-exhausted")


# ---------------------------------------------------------------------------
# inventory


@dataclass
class TypeInventory:
    surfaces: dict[str, list[str]] = field(default_factory=dict)
    type_of: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    _index: dict[str, list[tuple[tuple[str, ...], str]]] | None = field(default=None, repr=False)

    def add(self, surface: str, type_name: str) -> bool:
        owner = self.type_of.get(surface)
        if owner is not None:
            if owner != type_name:
                msg = f"surface {surface!r} already typed {owner!r}; ignoring {type_name!r}"
                self.warnings.append(msg)
                log.warning(msg)
            return False
        self.type_of[surface] = type_name
        self.surfaces.setdefault(type_name, []).append(surface)
        self._index = None
        return True

    @classmethod
    def from_pairs(cls, pairs) -> "TypeInventory":
        inv = cls()
        for surface, type_name in pairs:
            inv.add(surface, type_name)
        return inv

    def index(self) -> dict[str, list[tuple[tuple[str, ...], str]]]:
        """First token -> (token tuple, surface), longest first."""
        if self._index is None:
            idx = defaultdict(list)
            for surface in self.type_of:
                toks = tuple(tokenize(surface)[0])
                if toks:
                    idx[toks[0]].append((toks, surface))
            for entries in idx.values():
                entries.sort(key=lambda e: -len(e[0]))
            self._index = dict(idx)
        return self._index

    def stats(self) -> dict:
        n_types = len(self.surfaces)
        n_variants = len(self.type_of)
        return {"types": n_types, "variants": n_variants,
                "mean_variants_per_type": n_variants / n_types if n_types else 0.0}


def build_inventory(path: str | Path) -> TypeInventory:
    """Read ``surface<TAB>type`` lines; '#' starts a comment line."""
    inv = TypeInventory()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read knowledge base {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise DataError(f"{path}:{lineno}: expected 'surface<TAB>type', got {line!r}")
            inv.add(parts[0].strip(), parts[1].strip())
    return inv


# ---------------------------------------------------------------------------
# extraction


@dataclass(frozen=True)
class EntityOccurrence:
    sentence: int | None    # None for the question
    start: int              # token span [start, end) within the sentence/question
    end: int
    char_start: int         # character span in the context/question text
    char_end: int
    surface: str
    type_id: str
    number_kind: str | None = None

    @property
    def in_question(self) -> bool:
        return self.sentence is None


def _scan(tokens: list[str], offsets: list[int], text: str, inv: TypeInventory,
          sentence: int | None) -> list[EntityOccurrence]:
    index = inv.index()
    found = []
    t, n = 0, len(tokens)
    while t < n:
        best = None
        for toks, surface in index.get(tokens[t], ()):
            if tuple(tokens[t: t + len(toks)]) == toks:
                best = (len(toks), surface, inv.type_of[surface], None)
                break
        for width in (2, 1):
            if t + width <= n and (best is None or width > best[0]):
                kind = assign_number_type(tokens[t: t + width])
                if kind:
                    best = (width, None, NUMBER_PREFIX + kind, kind)
                    break
        if best is None:
            t += 1
            continue
        width, surface, type_id, kind = best
        lo = offsets[t]
        hi = offsets[t + width - 1] + len(tokens[t + width - 1])
        found.append(EntityOccurrence(sentence, t, t + width, lo, hi,
                                      surface if surface is not None else text[lo:hi],
                                      type_id, kind))
        t += width
    return found


def extract_entities(example: QAExample, inv: TypeInventory) -> list[EntityOccurrence]:
    """Entities in the document (sentence by sentence) followed by the question."""
    doc = example.document
    out = []
    for i, (sent, offs) in enumerate(zip(doc.sentences, doc.offsets)):
        out += _scan(sent, offs, doc.text, inv, i)
    out += _scan(example.question_tokens, example.question_offsets, example.question, inv, None)
    return out


# ---------------------------------------------------------------------------
# swap generation


@dataclass
class SwapOutcome:
    example: QAExample
    plan: dict[str, str]
    types: dict[str, str]
    document_edits: list[tuple[int, int, int, int]]   # (old_lo, old_hi, new_lo, new_hi)
    question_edits: list[tuple[int, int, int, int]]


def _distinct(occurrences: list[EntityOccurrence]) -> dict[str, EntityOccurrence]:
    first: dict[str, EntityOccurrence] = {}
    for occ in occurrences:
        first.setdefault(occ.surface, occ)
    return first


def _rewrite(text: str, spans: list[tuple[int, int, str]]):
    pieces, edits, pos, shift = [], [], 0, 0
    for lo, hi, rep in sorted(spans):
        pieces.append(text[pos:lo])
        pieces.append(rep)
        edits.append((lo, hi, lo + shift, lo + shift + len(rep)))
        shift += len(rep) - (hi - lo)
        pos = hi
    pieces.append(text[pos:])
    return "".join(pieces), edits


def _shift(pos: int, edits) -> int:
    return pos + sum((nhi - nlo) - (hi - lo) for lo, hi, nlo, nhi in edits if hi <= pos)


def _choices(occ: EntityOccurrence, inv: TypeInventory) -> list[str]:
    return [s for s in inv.surfaces.get(occ.type_id, []) if s != occ.surface]


def generate_swap(example: QAExample, inv: TypeInventory, rng: RngStream) -> SwapOutcome:
    """One consistent same-type replacement per distinct entity surface.

    Raises :class:`SwapRejected` when nothing can be swapped, when the
    answer span is cut by an entity boundary, when neither question nor
    answer changed, or when the rewritten answer no longer aligns.
    """
    if example.answer_text is None:
        raise SwapRejected("no-answer")
    occs = extract_entities(example, inv)
    if not occs:
        raise SwapRejected("no-entities")
    plan, types = {}, {}
    for surface, occ in _distinct(occs).items():
        if occ.number_kind is not None:
            plan[surface] = sample_number(occ.number_kind, surface, rng)
        else:
            options = _choices(occ, inv)
            if not options:
                continue
            plan[surface] = rng.choice(options)
        types[surface] = occ.type_id
    if not plan:
        raise SwapRejected("no-swappable-entities")

    doc_spans = [(o.char_start, o.char_end, plan[o.surface])
                 for o in occs if not o.in_question and o.surface in plan]
    q_spans = [(o.char_start, o.char_end, plan[o.surface])
               for o in occs if o.in_question and o.surface in plan]
    new_context, doc_edits = _rewrite(example.document.text, doc_spans)
    new_question, q_edits = _rewrite(example.question, q_spans)

    stripped = example.answer_text.strip()
    a_lo = example.answer_start + len(example.answer_text) - len(example.answer_text.lstrip())
    a_hi = a_lo + len(stripped)
    for lo, hi, _, _ in doc_edits:
        if lo < a_hi and hi > a_lo and not (a_lo <= lo and hi <= a_hi):
            raise SwapRejected("answer-span-lost")
    n_lo, n_hi = _shift(a_lo, doc_edits), _shift(a_hi, doc_edits)
    new_answer = new_context[n_lo:n_hi]

    if new_answer == stripped and tokenize(new_question)[0] == example.question_tokens:
        raise SwapRejected("no-mutation")
    try:
        swapped = QAExample.build(example.id + "-swap", new_context, new_question,
                                  new_answer, n_lo)
    except AlignmentError as exc:
        raise SwapRejected(f"alignment:{exc.reason}") from None
    return SwapOutcome(swapped, plan, types, doc_edits, q_edits)


def swap_choices(example: QAExample, inv: TypeInventory) -> dict[str, int]:
    """Number of possible replacements per distinct surface (original excluded)."""
    out = {}
    for surface, occ in _distinct(extract_entities(example, inv)).items():
        if occ.number_kind is not None:
            out[surface] = _number_space(occ.number_kind, surface) - 1
        else:
            out[surface] = len(_choices(occ, inv))
    return out


def log_swap_documents(example: QAExample, inv: TypeInventory) -> float:
    """log of the number of distinct (document, question) rewrites, ignoring the filter."""
    return sum(math.log(n) for n in swap_choices(example, inv).values() if n > 0)


def count_swap_documents(example: QAExample, inv: TypeInventory) -> int:
    return math.prod(n for n in swap_choices(example, inv).values() if n > 0)


def sample_augmented(dataset: Sequence[QAExample], inv: TypeInventory, count: int,
                     rng: RngStream, retries: int = 5, max_attempts: int | None = None
                     ) -> list[QAExample]:
    """Draw originals uniformly and keep accepted swaps until ``count`` are produced."""
    if count < 0:
        raise ValueError(f"augmentation count must be >= 0, got {count}")
    if count == 0:
        return []
    if not dataset:
        raise AugmentationError("no examples to augment")
    budget = max_attempts if max_attempts is not None else 50 * count
    out: list[QAExample] = []
    attempts = 0
    while len(out) < count:
        ex = dataset[rng.integers(0, len(dataset))]
        for _ in range(retries):
            if attempts >= budget:
                raise AugmentationError(
                    f"only {len(out)} of {count} swaps accepted after {attempts} attempts")
            attempts += 1
            try:
                swapped = generate_swap(ex, inv, rng).example
            except SwapRejected:
                continue
            swapped.id = f"{ex.id}-swap{len(out)}"
            out.append(swapped)
            break
    return out
