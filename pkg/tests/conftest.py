import numpy as np
import pytest

from gnr.dataio import QAExample
from gnr.encoders import WordVectorTable
from gnr.model import GNR, ModelConfig
from gnr.rng import RngStream


def table_for(examples, dim, seed=0):
    vocab = sorted({t for ex in examples for t in ex.document.tokens + ex.question_tokens})
    rng = RngStream(seed)
    return WordVectorTable({t: n for n, t in enumerate(vocab)}, rng.normal((len(vocab), dim)))


def tiny_model(examples, hidden=4, dim=5, depth=1, seed=0, dropout=0.0, mlp_hidden=None):
    cfg = ModelConfig(depth=depth, hidden=hidden, embedding_dim=dim,
                      mlp_hidden=mlp_hidden or hidden, recurrent_dropout=dropout,
                      fc_dropout=dropout)
    return GNR.create(cfg, table_for(examples, dim, seed), RngStream(seed + 1))


@pytest.fixture
def toy_example():
    """Two sentences of four tokens each."""
    return QAExample.build("toy", "Ada visited Oslo . Kurt stayed home .",
                           "Where did Ada go ?", "Oslo", 12)


@pytest.fixture
def rng():
    return RngStream(1234)


def assert_close(a, b, tol):
    np.testing.assert_allclose(a, b, rtol=tol, atol=tol)
