"""SQuAD-style answer normalisation, EM/F1 and the sentence metric."""

from __future__ import annotations

import json
import re
import unicodedata
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .dataio import AnswerTuple, QAExample
from .search import predict

_ARTICLES = re.compile(r"\b(a|an|the)\b")


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation (Unicode P*) and articles, collapse whitespace."""
    text = text.lower()
    text = "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def _require_golds(golds: Sequence[str]) -> None:
    if not golds:
        raise ValueError("at least one gold answer is required")


def exact_match(prediction: str, golds: Sequence[str]) -> int:
    _require_golds(golds)
    pred = normalize_answer(prediction)
    return int(any(pred == normalize_answer(g) for g in golds))


def _f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    common = Counter(pred_tokens) & Counter(gold_tokens)
    same = sum(common.values())
    if same == 0:
        return 0.0
    precision = same / len(pred_tokens)
    recall = same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def f1(prediction: str, golds: Sequence[str]) -> float:
    """Token-bag F1, maximised over the gold answers."""
    _require_golds(golds)
    pred = normalize_answer(prediction).split()
    return max(_f1(pred, normalize_answer(g).split()) for g in golds)


def sentence_score(predicted: AnswerTuple | None, gold: AnswerTuple) -> int:
    return int(predicted is not None and predicted[0] == gold[0])


@dataclass
class Metrics:
    exact_match: float
    f1: float
    sentence_accuracy: float
    count: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ExampleScore:
    id: str
    prediction_text: str
    em: int
    f1: float
    sentence: int


def score_example(example: QAExample, text: str, answer: AnswerTuple | None) -> ExampleScore:
    golds = example.answers or [example.answer_text]
    return ExampleScore(example.id, text, exact_match(text, golds), f1(text, golds),
                        sentence_score(answer, example.answer))


def aggregate(scores: Sequence[ExampleScore]) -> Metrics:
    if not scores:
        raise ValueError("cannot evaluate an empty dataset")
    n = len(scores)
    return Metrics(100.0 * sum(s.em for s in scores) / n, 100.0 * sum(s.f1 for s in scores) / n,
                   100.0 * sum(s.sentence for s in scores) / n, n)


def evaluate_predictions(dataset: Sequence[QAExample], predictions: dict[str, dict]
                         ) -> tuple[Metrics, list[ExampleScore]]:
    """Score a ``{id: {"text", "answer"?}}`` map; missing ids count as empty answers."""
    scores = []
    for ex in dataset:
        pred = predictions.get(ex.id, {})
        answer = pred.get("answer")
        scores.append(score_example(ex, pred.get("text", ""),
                                    AnswerTuple(*answer) if answer is not None else None))
    return aggregate(scores), scores


def evaluate(model, dataset: Sequence[QAExample], width: int,
             normalization: str = "global") -> tuple[Metrics, list[ExampleScore]]:
    """Decode every example with beam width ``width`` and average the metrics."""
    scores = []
    for ex in dataset:
        p = predict(model, ex, width, normalization)
        scores.append(score_example(ex, p.text, p.answer))
    return aggregate(scores), scores


def write_report(path: str | Path, metrics: Metrics, scores: Iterable[ExampleScore]) -> None:
    """JSON lines: one object per example, then the aggregate."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(json.dumps(asdict(s), sort_keys=True) + "\n")
        fh.write(json.dumps(metrics.to_json(), sort_keys=True) + "\n")
