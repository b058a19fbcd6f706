"""Parameter storage, Glorot initialisation, Adam and weight noise."""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator

import numpy as np

from .rng import RngStream
from .tensor import Tensor, parameter


def glorot(shape: tuple[int, ...], rng: RngStream) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return (rng.uniform(shape) * 2.0 - 1.0) * limit


class ParameterStore:
    """Named trainable tensors plus their Adam moments."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def items(self):
        return self.params.items()

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = parameter(np.array(value, dtype=np.float64))
        self.params[name] = t
        return t

    def weight(self, name: str, shape: tuple[int, ...], rng: RngStream) -> Tensor:
        return self.add(name, glorot(shape, rng))

    def bias(self, name: str, size: int) -> Tensor:
        return self.add(name, np.zeros(size))

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def count(self) -> int:
        return sum(t.size for t in self.params.values())


def adam_step(store: ParameterStore, lr: float = 5e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update over every parameter, then zero the grads."""
    store.step += 1
    t = store.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in store.params.items():
        if name not in store.m:
            store.m[name] = np.zeros_like(p.data)
            store.v[name] = np.zeros_like(p.data)
        m, v, g = store.m[name], store.v[name], p.grad
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.grad.fill(0.0)


def is_recurrent(name: str) -> bool:
    return name.endswith("/w_h")


def perturb_weights(store: ParameterStore, sigma: float, rng: RngStream,
                    select: Callable[[str], bool] = is_recurrent) -> dict[str, np.ndarray]:
    """Add N(0, sigma^2) noise in place to the selected weights; return the increments."""
    if sigma < 0:
        raise ValueError(f"noise sigma must be non-negative, got {sigma}")
    increments = {}
    for name, p in store.params.items():
        if not select(name):
            continue
        if sigma == 0:
            increments[name] = np.zeros_like(p.data)
            continue
        noise = rng.normal(p.shape, sigma)
        p.data += noise
        increments[name] = noise
    return increments


@contextmanager
def weight_noise(store: ParameterStore, sigma: float, rng: RngStream) -> Iterator[dict]:
    """Perturb recurrent weights for the duration of one step, then restore them exactly."""
    saved = {n: p.data.copy() for n, p in store.params.items() if is_recurrent(n)}
    increments = perturb_weights(store, sigma, rng)
    try:
        yield increments
    finally:
        for n, data in saved.items():
            store.params[n].data[...] = data
