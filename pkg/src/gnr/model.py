"""The Globally Normalized Reader: parameters plus the encoding pipeline."""

from __future__ import annotations

from dataclasses import dataclass

from .dataio import QAExample
from .encoders import (DocumentEncoding, QuestionEncoding, WordVectorTable, encode_document,
                       encode_question)
from .layers import Mode, add_bilstm_stack, add_dense, add_mlp
from .optim import ParameterStore
from .rng import RngStream


@dataclass
class ModelConfig:
    depth: int = 3
    hidden: int = 200
    embedding_dim: int = 300
    mlp_hidden: int = 200
    end_depth: int = 1
    recurrent_dropout: float = 0.3
    fc_dropout: float = 0.4
    max_doc_tokens: int = 1000

    @property
    def document_input_width(self) -> int:
        return 2 * self.embedding_dim + 4 * self.hidden + 2


@dataclass
class Encoding:
    question: QuestionEncoding
    document: DocumentEncoding


def build_parameters(cfg: ModelConfig, rng: RngStream) -> ParameterStore:
    h, d, m = cfg.hidden, cfg.embedding_dim, cfg.mlp_hidden
    store = ParameterStore()
    add_bilstm_stack(store, "question/lstm", d, h, cfg.depth, rng)
    add_mlp(store, "question/mlp", 2 * h, m, m, rng)
    store.weight("question/w_q", (m, 1), rng)
    add_mlp(store, "align/mlp", d, m, m, rng)
    add_bilstm_stack(store, "document/lstm", cfg.document_input_width, h, cfg.depth, rng)
    add_dense(store, "sentence/fc", 2 * h, 1, rng)
    add_dense(store, "start/fc", 2 * h, 1, rng)
    add_bilstm_stack(store, "end/lstm", 2 * h, h, cfg.end_depth, rng)
    add_dense(store, "end/fc", 2 * h, 1, rng)
    return store


class GNR:
    def __init__(self, config: ModelConfig, table: WordVectorTable, store: ParameterStore):
        if table.dim != config.embedding_dim:
            raise ValueError(f"word vectors have dim {table.dim}, config says {config.embedding_dim}")
        self.config = config
        self.table = table
        self.params = store

    @classmethod
    def create(cls, config: ModelConfig, table: WordVectorTable, rng: RngStream) -> "GNR":
        return cls(config, table, build_parameters(config, rng))

    def mode(self, training: bool, rng: RngStream | None = None) -> Mode:
        if not training:
            return Mode.inference()
        return Mode(True, rng, self.config.recurrent_dropout, self.config.fc_dropout)

    def encode(self, example: QAExample, mode: Mode | None = None) -> Encoding:
        mode = mode or Mode.inference()
        q = encode_question(example.question_tokens, self.table, self.params, self.config.depth, mode)
        d = encode_document(example.document, q, example.question_tokens, self.table, self.params,
                            self.config.depth, mode, self.config.max_doc_tokens)
        return Encoding(q, d)
