"""Staged answer search: sentence, then start word, then end word.

Scores for the three stages come from a :class:`StageScores` source, either
the neural scorers over a document encoding (:class:`ModelScores`) or fixed
numbers (:class:`FixedScores`) for rigged fixtures. Everything downstream
(beam search, local/global log-probabilities, the early-update loss) only
talks to that interface.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import tensor as T
from .dataio import AnswerTuple, DataError, QAExample
from .encoders import DocumentEncoding
from .layers import Mode, bi_lstm_stack, dense, dropout_fc
from .optim import ParameterStore
from .rng import RngStream
from .tensor import Tensor

DEFAULT_BEAM = 32


class SearchError(ValueError):
    """Invalid answer tuple or a violated beam contract."""


class Stage(enum.IntEnum):
    SENTENCE = 1
    START = 2
    COMPLETE = 3


# ---------------------------------------------------------------------------
# neural scorers


def _stack_depth(store: ParameterStore, prefix: str) -> int:
    depth = 0
    while f"{prefix}/{depth}/fwd/w_x" in store:
        depth += 1
    return depth


def score_sentences(enc: DocumentEncoding, store: ParameterStore, mode: Mode | None = None) -> Tensor:
    """One score per sentence from [h_bwd of its first word; h_fwd of its last word]."""
    mode = mode or Mode.inference()
    h = enc.hidden
    firsts = np.cumsum([0] + enc.lengths[:-1])
    lasts = np.cumsum(enc.lengths) - 1
    rep = T.concat([enc.states[firsts, h:], enc.states[lasts, :h]], axis=1)
    return T.reshape(dense(dropout_fc(rep, mode), store, "sentence/fc"), (len(enc.lengths),))


def _rows(enc: DocumentEncoding, i: int) -> range:
    if not 0 <= i < len(enc.lengths):
        raise IndexError(f"sentence {i} out of range for {len(enc.lengths)} sentences")
    return enc.sentence_rows(i)


def score_starts(enc: DocumentEncoding, i: int, store: ParameterStore,
                 mode: Mode | None = None) -> Tensor:
    rows = _rows(enc, i)
    rep = enc.states[rows.start: rows.stop]
    return T.reshape(dense(dropout_fc(rep, mode or Mode.inference()), store, "start/fc"), (len(rows),))


def score_ends(enc: DocumentEncoding, i: int, j: int, store: ParameterStore,
               mode: Mode | None = None) -> Tensor:
    """End scores for k = j .. m_i - 1, from a fresh Bi-LSTM over the remaining states."""
    rows = _rows(enc, i)
    if not 0 <= j < len(rows):
        raise IndexError(f"start {j} out of range for sentence {i} of length {len(rows)}")
    mode = mode or Mode.inference()
    rest = enc.states[rows.start + j: rows.stop]
    tilde = bi_lstm_stack(rest, store, "end/lstm", _stack_depth(store, "end/lstm"), mode)
    return T.reshape(dense(dropout_fc(tilde, mode), store, "end/fc"), (len(rows) - j,))


# ---------------------------------------------------------------------------
# score sources


class StageScores:
    """Lazily computed, cached stage scores with an end-scorer call counter."""

    def __init__(self, lengths: Sequence[int]):
        if not lengths or min(lengths) < 1:
            raise DataError(f"document needs non-empty sentences, got lengths {list(lengths)}")
        self.lengths = list(lengths)
        self.end_calls = 0
        self._sent: Tensor | None = None
        self._starts: dict[int, Tensor] = {}
        self._ends: dict[tuple[int, int], Tensor] = {}

    def sentences(self) -> Tensor:
        if self._sent is None:
            self._sent = self._compute_sentences()
        return self._sent

    def starts(self, i: int) -> Tensor:
        if not 0 <= i < len(self.lengths):
            raise IndexError(f"sentence {i} out of range")
        if i not in self._starts:
            self._starts[i] = self._compute_starts(i)
        return self._starts[i]

    def ends(self, i: int, j: int) -> Tensor:
        if not (0 <= i < len(self.lengths) and 0 <= j < self.lengths[i]):
            raise IndexError(f"start ({i}, {j}) out of range")
        if (i, j) not in self._ends:
            self.end_calls += 1
            self._ends[(i, j)] = self._compute_ends(i, j)
        return self._ends[(i, j)]

    def _compute_sentences(self) -> Tensor:
        raise NotImplementedError

    def _compute_starts(self, i: int) -> Tensor:
        raise NotImplementedError

    def _compute_ends(self, i: int, j: int) -> Tensor:
        raise NotImplementedError


class ModelScores(StageScores):
    def __init__(self, enc: DocumentEncoding, store: ParameterStore, mode: Mode | None = None):
        super().__init__(enc.lengths)
        self.enc = enc
        self.store = store
        self.mode = mode or Mode.inference()

    def _compute_sentences(self):
        return score_sentences(self.enc, self.store, self.mode)

    def _compute_starts(self, i):
        return score_starts(self.enc, i, self.store, self.mode)

    def _compute_ends(self, i, j):
        return score_ends(self.enc, i, j, self.store, self.mode)


class FixedScores(StageScores):
    """Hand-set scores. ``ends[(i, j)]`` lists the scores for k = j .. m_i - 1."""

    def __init__(self, sentences, starts, ends, requires_grad: bool = False):
        starts = [np.asarray(s, dtype=float) for s in starts]
        super().__init__([len(s) for s in starts])
        if len(sentences) != len(starts):
            raise ValueError("one start-score list per sentence required")
        make = T.parameter if requires_grad else T.constant
        self.sentence_leaf = make(np.asarray(sentences, dtype=float))
        self.start_leaves = [make(s) for s in starts]
        self.end_leaves = {}
        for (i, j), e in ends.items():
            e = np.asarray(e, dtype=float)
            if e.shape != (self.lengths[i] - j,):
                raise ValueError(f"ends[{i},{j}] needs {self.lengths[i] - j} scores, got {e.shape}")
            self.end_leaves[(i, j)] = make(e)

    @classmethod
    def random(cls, lengths: Sequence[int], rng: RngStream, scale: float = 1.0,
               requires_grad: bool = False) -> "FixedScores":
        sent = rng.normal((len(lengths),), scale)
        starts = [rng.normal((m,), scale) for m in lengths]
        ends = {(i, j): rng.normal((m - j,), scale)
                for i, m in enumerate(lengths) for j in range(m)}
        return cls(sent, starts, ends, requires_grad)

    def leaves(self) -> list[Tensor]:
        return [self.sentence_leaf, *self.start_leaves, *self.end_leaves.values()]

    def _compute_sentences(self):
        return self.sentence_leaf

    def _compute_starts(self, i):
        return self.start_leaves[i]

    def _compute_ends(self, i, j):
        return self.end_leaves[(i, j)]


# ---------------------------------------------------------------------------
# answer space and normalisation


def all_answers(lengths: Sequence[int]) -> Iterator[AnswerTuple]:
    for i, m in enumerate(lengths):
        for j in range(m):
            for k in range(j, m):
                yield AnswerTuple(i, j, k)


def check_answer(a: Sequence[int], lengths: Sequence[int]) -> AnswerTuple:
    if len(a) != 3:
        raise SearchError(f"answer must be (sentence, start, end), got {tuple(a)}")
    i, j, k = (int(x) for x in a)
    if not (0 <= i < len(lengths) and 0 <= j <= k < lengths[i]):
        raise SearchError(f"answer {(i, j, k)} is not valid for sentence lengths {list(lengths)}")
    return AnswerTuple(i, j, k)


def path_score(source: StageScores, path: Sequence[int]) -> Tensor:
    """Sum of the stage scores along a (possibly partial) path."""
    score = source.sentences()[path[0]]
    if len(path) > 1:
        score = score + source.starts(path[0])[path[1]]
    if len(path) > 2:
        score = score + source.ends(path[0], path[1])[path[2] - path[1]]
    return score


def local_log_prob(a: Sequence[int], source: StageScores) -> Tensor:
    """log P_sent(i) + log P_sw(j | i) + log P_ew(k | i, j), each a softmax over its stage."""
    i, j, k = check_answer(a, source.lengths)
    return (T.log_softmax(source.sentences())[i]
            + T.log_softmax(source.starts(i))[j]
            + T.log_softmax(source.ends(i, j))[k - j])


def local_path_probabilities(a: Sequence[int], source: StageScores) -> list[float]:
    """Cumulative locally normalised probability after each stage."""
    i, j, k = check_answer(a, source.lengths)
    steps = [T._softmax(source.sentences().data)[i],
             T._softmax(source.starts(i).data)[j],
             T._softmax(source.ends(i, j).data)[k - j]]
    return list(np.cumprod(steps))


def exact_log_partition(source: StageScores) -> Tensor:
    """log of the sum of exp(score) over every valid answer."""
    sent = source.sentences()
    pieces = []
    for i, m in enumerate(source.lengths):
        starts = source.starts(i)
        for j in range(m):
            pieces.append(source.ends(i, j) + (sent[i] + starts[j]))
    return T.log_sum_exp(T.concat(pieces))


def global_log_prob(a: Sequence[int], source: StageScores, beam: "Beam | None" = None,
                    force: bool = False) -> Tensor:
    """score(a) - log Z, with Z exact or summed over a final beam.

    In beam mode ``a`` must be on the beam unless ``force`` adds it to the sum.
    """
    a = check_answer(a, source.lengths)
    if beam is None:
        return path_score(source, a) - exact_log_partition(source)
    paths = beam.paths()
    if a not in paths:
        if not force:
            raise SearchError(f"answer {tuple(a)} is not on the beam")
        paths = paths + [a]
    return path_score(source, a) - T.log_sum_exp(T.stack([path_score(source, p) for p in paths]))


# ---------------------------------------------------------------------------
# beam search


@dataclass(frozen=True)
class SearchCandidate:
    stage: Stage
    path: tuple
    score: float
    is_gold_prefix: bool = False

    @property
    def answer(self) -> AnswerTuple:
        if self.stage != Stage.COMPLETE:
            raise SearchError(f"candidate {self.path} is not complete")
        return AnswerTuple(*self.path)


@dataclass
class Beam:
    width: int
    candidates: list[SearchCandidate]

    @classmethod
    def prune(cls, width: int, candidates: list[SearchCandidate]) -> "Beam":
        ranked = sorted(candidates, key=lambda c: (-c.score, c.path))
        return cls(width, ranked[:width])

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def paths(self) -> list[tuple]:
        return [c.path for c in self.candidates]

    @property
    def top(self) -> SearchCandidate:
        return self.candidates[0]

    def log_partition(self) -> float:
        return T._log_sum_exp(np.array([c.score for c in self.candidates]))

    def probability(self, path: Sequence[int]) -> float:
        """exp(score) of ``path`` normalised over this beam."""
        for c in self.candidates:
            if c.path == tuple(path):
                return math.exp(c.score - self.log_partition())
        raise SearchError(f"{tuple(path)} is not on the beam")


@dataclass
class SearchTrace:
    beams: list[Beam] = field(default_factory=list)
    falloff: Stage | None = None

    @property
    def final(self) -> Beam:
        return self.beams[-1]


def _stage_values(scores: Tensor, normalization: str) -> np.ndarray:
    if normalization == "local":
        return scores.data - T._log_sum_exp(scores.data)
    return scores.data


def beam_search(source: StageScores, width: int, normalization: str = "global",
                gold: Sequence[int] | None = None, stop_on_falloff: bool = False) -> SearchTrace:
    """Run the three pruned stages, optionally tracking a gold answer.

    Candidates are ranked by cumulative raw score (global) or cumulative
    log-probability (local); ties go to the lexicographically smaller path.
    End scores are computed only for (sentence, start) pairs on the stage-2
    beam.
    """
    if width < 1:
        raise ValueError(f"beam width must be >= 1, got {width}")
    if normalization not in ("global", "local"):
        raise ValueError(f"normalization must be 'global' or 'local', got {normalization!r}")
    gold = tuple(check_answer(gold, source.lengths)) if gold is not None else None
    trace = SearchTrace()

    def on_gold(path):
        return gold is not None and gold[: len(path)] == path

    sent = _stage_values(source.sentences(), normalization)
    beam = Beam.prune(width, [SearchCandidate(Stage.SENTENCE, (i,), float(v), on_gold((i,)))
                              for i, v in enumerate(sent)])
    for stage in (Stage.START, Stage.COMPLETE):
        trace.beams.append(beam)
        if gold is not None and trace.falloff is None and gold[:stage - 1] not in beam.paths():
            trace.falloff = Stage(stage - 1)
            if stop_on_falloff:
                return trace
        expanded = []
        for c in beam:
            if stage == Stage.START:
                (i,) = c.path
                vals = _stage_values(source.starts(i), normalization)
                paths = [(i, j) for j in range(len(vals))]
            else:
                i, j = c.path
                vals = _stage_values(source.ends(i, j), normalization)
                paths = [(i, j, j + x) for x in range(len(vals))]
            expanded += [SearchCandidate(stage, p, c.score + float(v), on_gold(p))
                         for p, v in zip(paths, vals)]
        beam = Beam.prune(width, expanded)
    trace.beams.append(beam)
    if gold is not None and trace.falloff is None and gold not in beam.paths():
        trace.falloff = Stage.COMPLETE
    return trace


def beam_decode(source: StageScores, width: int = DEFAULT_BEAM,
                normalization: str = "global") -> Beam:
    """Final beam of complete answers; ``.top`` is the prediction."""
    return beam_search(source, width, normalization).final


def global_path_probabilities(a: Sequence[int], trace: SearchTrace) -> list[float]:
    """Probability of each prefix of ``a`` normalised over the beam at that stage."""
    return [beam.probability(tuple(a)[: stage]) for stage, beam in enumerate(trace.beams, 1)]


# ---------------------------------------------------------------------------
# training objective


@dataclass
class Objective:
    loss: Tensor
    falloff: Stage | None
    trace: SearchTrace | None = None


def beam_objective(source: StageScores, gold: Sequence[int], width: int) -> Objective:
    """Globally normalised loss with the partition summed over the beam.

    If the gold prefix drops off the beam at stage t, the loss is the
    partial objective through t normalised over the stage-t beam plus the
    gold prefix; otherwise the final beam (plus the gold, if it was cut at the
    last stage) approximates Z.
    """
    gold = check_answer(gold, source.lengths)
    trace = beam_search(source, width, "global", gold, stop_on_falloff=True)
    falloff = trace.falloff
    if falloff is not None and falloff < Stage.COMPLETE:
        beam = trace.beams[falloff - 1]
        target = tuple(gold[:falloff])
    else:
        beam = trace.final
        target = tuple(gold)
    paths = beam.paths()
    if target not in paths:
        paths.append(target)
    log_z = T.log_sum_exp(T.stack([path_score(source, p) for p in paths]))
    return Objective(log_z - path_score(source, target), falloff, trace)


def local_objective(source: StageScores, gold: Sequence[int]) -> Objective:
    return Objective(-local_log_prob(gold, source), None)


@dataclass
class StepResult:
    loss: float
    falloff: Stage | None
    end_calls: int


def train_step(model, example: QAExample, width: int, normalization: str, rng: RngStream,
               scale: float = 1.0, training: bool = True) -> StepResult:
    """Forward + backward on one example; gradients accumulate into model.params."""
    if example.answer is None:
        raise DataError(f"{example.id}: no gold answer")
    mode = model.mode(training, rng)
    enc = model.encode(example, mode)
    source = ModelScores(enc.document, model.params, mode)
    check_answer(example.answer, source.lengths)
    if normalization == "global":
        obj = beam_objective(source, example.answer, width)
    elif normalization == "local":
        obj = local_objective(source, example.answer)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    T.scale(obj.loss, scale).backward()
    return StepResult(obj.loss.item(), obj.falloff, source.end_calls)


@dataclass
class Prediction:
    answer: AnswerTuple
    probability: float
    score: float
    text: str
    end_calls: int


def predict(model, example: QAExample, width: int = DEFAULT_BEAM,
            normalization: str = "global") -> Prediction:
    enc = model.encode(example)
    source = ModelScores(enc.document, model.params)
    beam = beam_decode(source, width, normalization)
    top = beam.top
    if normalization == "local":
        prob = math.exp(top.score)
    else:
        prob = math.exp(top.score - beam.log_partition())
    return Prediction(top.answer, prob, top.score, example.document.span_text(top.answer),
                      source.end_calls)
