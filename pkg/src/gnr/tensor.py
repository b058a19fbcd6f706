"""Reverse-mode automatic differentiation over numpy arrays.

Graphs are built define-by-run: every op returns a new :class:`Tensor` that
remembers its parents and a closure that pushes the output gradient back to
them. Nodes that do not depend on any trainable leaf carry no graph at all,
so inference runs at plain numpy speed.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (),
                 backward: Callable[[np.ndarray], None] | None = None, op: str = ""):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents = parents
        self._backward = backward
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'})"

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.shape}")
        if not self.requires_grad:
            return
        order = _topological(self)
        self.grad += 1.0
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    @property
    def T(self):
        return transpose(self)

    def sum(self):
        return total(self)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    return Tensor(x)


def parameter(x) -> Tensor:
    return Tensor(x, requires_grad=True)


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward, op: str) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward, op)
    return Tensor(data, op=op)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> np.ndarray:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot combine shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g, a.shape)
        if b.requires_grad:
            b.grad -= _unbroadcast(g, b.shape)

    return _result(a.data - b.data, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")

    def backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g * b.data, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), backward, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    def backward(g):
        a.grad += g * c

    return _result(a.data * c, (a,), backward, "scale")


# ---------------------------------------------------------------------------
# linear algebra and reshaping


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two rank-2 tensors."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.grad += g @ b.data.T
        if b.requires_grad:
            b.grad += a.data.T @ g

    return _result(a.data @ b.data, (a, b), backward, "matmul")


def transpose(a: Tensor) -> Tensor:
    def backward(g):
        a.grad += g.T

    return _result(a.data.T, (a,), backward, "transpose")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {tuple(shape)}") from None

    def backward(g):
        a.grad += g.reshape(a.shape)

    return _result(out, (a,), backward, "reshape")


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)


def take(a: Tensor, index) -> Tensor:
    """Numpy-style indexing; repeated advanced indices accumulate gradient."""
    out = a.data[index]
    basic = _is_basic_index(index)

    def backward(g):
        if basic:
            a.grad[index] += g
        else:
            np.add.at(a.grad, index, g)

    return _result(np.array(out, dtype=DTYPE), (a,), backward, "take")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: no inputs")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise ShapeError(f"concat along axis {axis}: incompatible shapes {shapes}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t.grad += g[tuple(sl)]

    return _result(out, tuple(tensors), backward, "concat")


def stack(scalars: Iterable[Tensor]) -> Tensor:
    """Gather scalar (or size-1) tensors into a vector."""
    return concat([reshape(s, (1,)) for s in scalars], axis=0)


def total(a: Tensor) -> Tensor:
    def backward(g):
        a.grad += g

    return _result(np.asarray(a.data.sum()), (a,), backward, "sum")


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        a.grad += g * mask

    return _result(a.data * mask, (a,), backward, "relu")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid(a.data)

    def backward(g):
        a.grad += g * y * (1.0 - y)

    return _result(y, (a,), backward, "sigmoid")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def backward(g):
        a.grad += g * (1.0 - y * y)

    return _result(y, (a,), backward, "tanh")


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _log_sum_exp(x: np.ndarray) -> float:
    m = x.max()
    return float(m + np.log(np.exp(x - m).sum()))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax along ``axis``."""
    if a.data.size == 0 or a.data.ndim == 0:
        raise ShapeError(f"softmax: empty input of shape {a.shape}")
    y = _softmax(a.data, axis)

    def backward(g):
        a.grad += y * (g - (g * y).sum(axis=axis, keepdims=True))

    return _result(y, (a,), backward, "softmax")


def log_softmax(a: Tensor) -> Tensor:
    if a.data.ndim != 1 or a.data.size == 0:
        raise ShapeError(f"log_softmax: need a non-empty vector, got {a.shape}")
    y = a.data - _log_sum_exp(a.data)

    def backward(g):
        a.grad += g - np.exp(y) * g.sum()

    return _result(y, (a,), backward, "log_softmax")


def log_sum_exp(a: Tensor) -> Tensor:
    """log(sum(exp(a))) of a vector, returned as a scalar tensor."""
    if a.data.ndim != 1 or a.data.size == 0:
        raise ShapeError(f"log_sum_exp: need a non-empty vector, got {a.shape}")
    out = _log_sum_exp(a.data)

    def backward(g):
        a.grad += g * np.exp(a.data - out)

    return _result(np.asarray(out), (a,), backward, "log_sum_exp")


# ---------------------------------------------------------------------------
# fused recurrent kernel


def lstm_sequence(x: Tensor, w_x: Tensor, w_h: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """Run an LSTM over the rows of ``x`` (T x n) from zero initial state.

    Gates are laid out ``[input, forget, candidate, output]`` along the
    4h columns of ``w_x`` (n x 4h), ``w_h`` (h x 4h) and ``b`` (4h).
    With ``reverse`` the sequence is consumed last row first; output row t
    is always the state at input position t.
    """
    if x.data.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"lstm: need a non-empty (T, n) input, got {x.shape}")
    h = w_h.shape[0]
    if w_x.shape != (x.shape[1], 4 * h) or w_h.shape != (h, 4 * h) or b.shape != (4 * h,):
        raise ShapeError(
            f"lstm: input {x.shape} with w_x {w_x.shape}, w_h {w_h.shape}, b {b.shape}"
        )
    xs = x.data[::-1] if reverse else x.data
    steps = xs.shape[0]
    pre = xs @ w_x.data + b.data
    Wh = w_h.data
    hs = np.zeros((steps + 1, h))
    cs = np.zeros((steps + 1, h))
    gates = np.empty((steps, 4 * h))
    for t in range(steps):
        z = pre[t] + hs[t] @ Wh
        act = gates[t]
        act[: 2 * h] = _sigmoid(z[: 2 * h])
        act[2 * h: 3 * h] = np.tanh(z[2 * h: 3 * h])
        act[3 * h:] = _sigmoid(z[3 * h:])
        cs[t + 1] = act[h: 2 * h] * cs[t] + act[:h] * act[2 * h: 3 * h]
        hs[t + 1] = act[3 * h:] * np.tanh(cs[t + 1])
    out = hs[1:]
    if reverse:
        out = out[::-1]

    def backward(g):
        gs = g[::-1] if reverse else g
        dz = np.empty((steps, 4 * h))
        dh_next = np.zeros(h)
        dc_next = np.zeros(h)
        for t in range(steps - 1, -1, -1):
            act = gates[t]
            i, f, cand, o = act[:h], act[h: 2 * h], act[2 * h: 3 * h], act[3 * h:]
            tc = np.tanh(cs[t + 1])
            dh = gs[t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            d = dz[t]
            d[:h] = dc * cand * i * (1.0 - i)
            d[h: 2 * h] = dc * cs[t] * f * (1.0 - f)
            d[2 * h: 3 * h] = dc * i * (1.0 - cand * cand)
            d[3 * h:] = dh * tc * o * (1.0 - o)
            dc_next = dc * f
            dh_next = Wh @ d
        if w_h.requires_grad:
            w_h.grad += hs[:-1].T @ dz
        if w_x.requires_grad:
            w_x.grad += xs.T @ dz
        if b.requires_grad:
            b.grad += dz.sum(axis=0)
        if x.requires_grad:
            dx = dz @ w_x.data.T
            x.grad += dx[::-1] if reverse else dx

    return _result(np.ascontiguousarray(out), (x, w_x, w_h, b), backward, "lstm")
