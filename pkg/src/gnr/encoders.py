"""Question and question-aware document encoders."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .dataio import DataError, TokenizedDocument
from .layers import Mode, bi_lstm_stack, dropout_fc, mlp2
from .optim import ParameterStore
from .tensor import Tensor


class WordVectorTable:
    """Frozen word embeddings; unknown tokens map to the zero vector."""

    def __init__(self, vocab: dict[str, int], matrix: np.ndarray):
        if matrix.ndim != 2 or matrix.shape[0] != len(vocab):
            raise ValueError(f"matrix {matrix.shape} does not match vocabulary of {len(vocab)}")
        self.vocab = vocab
        self.matrix = np.asarray(matrix, dtype=np.float64)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self.vocab or token.lower() in self.vocab

    def vector(self, token: str) -> np.ndarray:
        idx = self.vocab.get(token)
        if idx is None:
            idx = self.vocab.get(token.lower())
        return self.matrix[idx] if idx is not None else np.zeros(self.dim)

    def lookup(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self.vector(t) for t in tokens])

    @classmethod
    def load(cls, path: str | Path) -> "WordVectorTable":
        """Read ``token v1 ... vD`` lines; D is fixed by the first line."""
        vocab: dict[str, int] = {}
        rows: list[np.ndarray] = []
        dim = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split(" ")
                if not line.strip():
                    continue
                if dim is None:
                    dim = len(parts) - 1
                if len(parts) - 1 != dim or dim < 1:
                    raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
                try:
                    vec = np.array([float(v) for v in parts[1:]])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
                if parts[0] not in vocab:
                    vocab[parts[0]] = len(rows)
                    rows.append(vec)
        if dim is None:
            raise DataError(f"{path}: no word vectors")
        return cls(vocab, np.stack(rows))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for token, idx in self.vocab.items():
                fh.write(token + " " + " ".join(repr(float(v)) for v in self.matrix[idx]) + "\n")


@dataclass
class QuestionEncoding:
    states: Tensor        # (l, 2h) rows [h_fwd; h_bwd]
    attention: Tensor     # (l,)
    independent: Tensor   # (1, 2h)
    summary: Tensor       # (1, 4h) = [h_1 bwd; h_l fwd; q_indep]
    word_vectors: np.ndarray  # (l, D)


@dataclass
class DocumentEncoding:
    states: Tensor        # (N, 2h) rows [h_fwd; h_bwd], document order
    features: Tensor      # (N, D + 4h + 2 + D) input to the document stack
    alignment: Tensor     # (N, l) question-aligned attention
    lengths: list[int]
    hidden: int

    def sentence_rows(self, i: int) -> range:
        lo = sum(self.lengths[:i])
        return range(lo, lo + self.lengths[i])


def encode_question(tokens: list[str], table: WordVectorTable, store: ParameterStore,
                    depth: int, mode: Mode | None = None) -> QuestionEncoding:
    if not tokens:
        raise DataError("cannot encode an empty question")
    mode = mode or Mode.inference()
    vecs = table.lookup(tokens)
    states = bi_lstm_stack(T.constant(vecs), store, "question/lstm", depth, mode)
    hidden = states.shape[1] // 2
    fwd, bwd = states[:, :hidden], states[:, hidden:]
    bwd_fwd = T.concat([bwd, fwd], axis=1)
    proj = mlp2(dropout_fc(bwd_fwd, mode), store, "question/mlp")
    scores = T.reshape(proj @ store["question/w_q"], (len(tokens),))
    alpha = T.softmax(scores)
    indep = T.reshape(alpha, (1, len(tokens))) @ bwd_fwd
    summary = T.concat([bwd[0:1], fwd[len(tokens) - 1:], indep], axis=1)
    return QuestionEncoding(states, alpha, indep, summary, vecs)


def question_aligned_embedding(word_vecs: np.ndarray, question_vecs: np.ndarray,
                               store: ParameterStore, mode: Mode | None = None
                               ) -> tuple[Tensor, Tensor]:
    """Attend from each document word over the question words.

    Scores are dot products of the shared MLP projections; the output is the
    attention-weighted sum of the raw question word vectors. Returns the
    (N, D) embeddings and the (N, l) attention weights.
    """
    if len(question_vecs) == 0:
        raise DataError("question-aligned embedding needs at least one question word")
    mode = mode or Mode.inference()
    d = mlp2(dropout_fc(T.constant(word_vecs), mode), store, "align/mlp")
    q = mlp2(dropout_fc(T.constant(question_vecs), mode), store, "align/mlp")
    alpha = T.softmax(d @ q.T, axis=1)
    return alpha @ T.constant(question_vecs), alpha


def boolean_features(doc: TokenizedDocument, question: list[str]) -> np.ndarray:
    """Per document word: [appears in question, appeared earlier in document]."""
    in_question = {t.lower() for t in question}
    seen: set[str] = set()
    flags = np.zeros((len(doc), 2))
    for n, tok in enumerate(doc.tokens):
        low = tok.lower()
        flags[n, 0] = low in in_question
        flags[n, 1] = low in seen
        seen.add(low)
    return flags


def encode_document(doc: TokenizedDocument, question: QuestionEncoding, question_tokens: list[str],
                    table: WordVectorTable, store: ParameterStore, depth: int,
                    mode: Mode | None = None, max_tokens: int | None = None) -> DocumentEncoding:
    n = len(doc)
    if n == 0:
        raise DataError("cannot encode an empty document")
    if max_tokens is not None and n > max_tokens:
        raise DataError(f"document has {n} tokens, above the cap of {max_tokens}")
    mode = mode or Mode.inference()
    vecs = table.lookup(doc.tokens)
    aligned, alpha = question_aligned_embedding(vecs, question.word_vectors, store, mode)
    tiled = T.constant(np.ones((n, 1))) @ question.summary
    flags = T.constant(boolean_features(doc, question_tokens))
    features = T.concat([T.constant(vecs), tiled, flags, aligned], axis=1)
    states = bi_lstm_stack(features, store, "document/lstm", depth, mode)
    return DocumentEncoding(states, features, alpha, doc.lengths, states.shape[1] // 2)
