"""Network building blocks on top of :mod:`gnr.tensor`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .optim import ParameterStore
from .rng import RngStream
from .tensor import ShapeError, Tensor


@dataclass
class Mode:
    """Training/inference switch plus the dropout rates and their rng."""

    training: bool = False
    rng: RngStream | None = None
    recurrent_dropout: float = 0.0
    fc_dropout: float = 0.0

    @classmethod
    def inference(cls) -> "Mode":
        return cls()


def apply_dropout(x: Tensor, rate: float, rng: RngStream | None, training: bool) -> Tensor:
    """Inverted dropout: zero each entry with probability ``rate``, scale the rest."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an RngStream")
    keep = (rng.uniform(x.shape) >= rate) / (1.0 - rate)
    return T.mul(x, T.constant(keep))


def dropout_rec(x: Tensor, mode: Mode) -> Tensor:
    return apply_dropout(x, mode.recurrent_dropout, mode.rng, mode.training)


def dropout_fc(x: Tensor, mode: Mode) -> Tensor:
    return apply_dropout(x, mode.fc_dropout, mode.rng, mode.training)


# ---------------------------------------------------------------------------
# parameter constructors


def add_dense(store: ParameterStore, prefix: str, n_in: int, n_out: int, rng: RngStream) -> None:
    store.weight(f"{prefix}/w", (n_in, n_out), rng)
    store.bias(f"{prefix}/b", n_out)


def add_mlp(store: ParameterStore, prefix: str, n_in: int, n_hidden: int, n_out: int,
            rng: RngStream) -> None:
    add_dense(store, f"{prefix}/l1", n_in, n_hidden, rng)
    add_dense(store, f"{prefix}/l2", n_hidden, n_out, rng)


def add_lstm(store: ParameterStore, prefix: str, n_in: int, hidden: int, rng: RngStream) -> None:
    store.weight(f"{prefix}/w_x", (n_in, 4 * hidden), rng)
    store.weight(f"{prefix}/w_h", (hidden, 4 * hidden), rng)
    b = np.zeros(4 * hidden)
    b[hidden: 2 * hidden] = 1.0  # forget gate
    store.add(f"{prefix}/b", b)


def add_bilstm_stack(store: ParameterStore, prefix: str, n_in: int, hidden: int, depth: int,
                     rng: RngStream) -> None:
    for layer in range(depth):
        width = n_in if layer == 0 else 2 * hidden
        for direction in ("fwd", "bwd"):
            add_lstm(store, f"{prefix}/{layer}/{direction}", width, hidden, rng)


# ---------------------------------------------------------------------------
# forward functions


def dense(x: Tensor, store: ParameterStore, prefix: str) -> Tensor:
    w, b = store[f"{prefix}/w"], store[f"{prefix}/b"]
    if x.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense {prefix}: input {x.shape} vs weight {w.shape}")
    return x @ w + b


def mlp2(x: Tensor, store: ParameterStore, prefix: str) -> Tensor:
    """affine -> relu -> affine, row-wise over a (N, n_in) input."""
    return dense(T.relu(dense(x, store, f"{prefix}/l1")), store, f"{prefix}/l2")


def lstm_step(x: Tensor, h_prev: Tensor, c_prev: Tensor, store: ParameterStore,
              prefix: str) -> tuple[Tensor, Tensor]:
    """One LSTM cell update on (1, n) input and (1, h) state, from primitive ops."""
    w_x, w_h, b = store[f"{prefix}/w_x"], store[f"{prefix}/w_h"], store[f"{prefix}/b"]
    hidden = w_h.shape[0]
    if x.shape != (1, w_x.shape[0]) or h_prev.shape != (1, hidden) or c_prev.shape != (1, hidden):
        raise ShapeError(
            f"lstm_step {prefix}: x {x.shape}, h {h_prev.shape}, c {c_prev.shape} "
            f"for w_x {w_x.shape}"
        )
    z = x @ w_x + h_prev @ w_h + b
    i = T.sigmoid(z[:, :hidden])
    f = T.sigmoid(z[:, hidden: 2 * hidden])
    g = T.tanh(z[:, 2 * hidden: 3 * hidden])
    o = T.sigmoid(z[:, 3 * hidden:])
    c = f * c_prev + i * g
    h = o * T.tanh(c)
    return h, c


def lstm(x: Tensor, store: ParameterStore, prefix: str, reverse: bool = False) -> Tensor:
    return T.lstm_sequence(x, store[f"{prefix}/w_x"], store[f"{prefix}/w_h"],
                           store[f"{prefix}/b"], reverse=reverse)


def bi_lstm_stack(x: Tensor, store: ParameterStore, prefix: str, depth: int,
                  mode: Mode | None = None) -> Tensor:
    """Stacked bidirectional LSTM over the rows of ``x``.

    Returns a (T, 2h) matrix whose row t is ``[h_fwd_t; h_bwd_t]`` of the top
    layer. Each layer reads the concatenated states of the layer below, with
    recurrent-input dropout applied per position.
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if x.data.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"bi_lstm_stack {prefix}: need a non-empty sequence, got {x.shape}")
    mode = mode or Mode.inference()
    for layer in range(depth):
        inp = dropout_rec(x, mode)
        fwd = lstm(inp, store, f"{prefix}/{layer}/fwd")
        bwd = lstm(inp, store, f"{prefix}/{layer}/bwd", reverse=True)
        x = T.concat([fwd, bwd], axis=1)
    return x
