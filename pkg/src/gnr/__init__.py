"""Globally normalized extractive reader with staged beam search and Type Swaps."""

from .config import RunConfig, load_config
from .dataio import AnswerTuple, QAExample, TokenizedDocument, load_squad
from .model import GNR, ModelConfig
from .search import beam_decode, predict, train_step

__all__ = ["AnswerTuple", "GNR", "ModelConfig", "QAExample", "RunConfig", "TokenizedDocument",
           "beam_decode", "load_config", "load_squad", "predict", "train_step"]
