"""Central finite-difference checks for analytic gradients."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .tensor import Tensor


def numerical_grad(f: Callable[[], Tensor], leaf: Tensor, step: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(leaf.data)
    flat = leaf.data.reshape(-1)
    out = grad.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + step
        up = f().item()
        flat[idx] = orig - step
        down = f().item()
        flat[idx] = orig
        out[idx] = (up - down) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||); zero when both vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(f: Callable[[], Tensor], leaves: Iterable[Tensor],
                    step: float = 1e-5) -> list[float]:
    """Relative error per leaf between backward() and central differences.

    ``f`` must rebuild the graph from the leaves on every call and be
    deterministic (fix any dropout rng inside it).
    """
    leaves = list(leaves)
    for leaf in leaves:
        leaf.zero_grad()
    f().backward()
    analytic = [leaf.grad.copy() for leaf in leaves]
    errors = [relative_error(a, numerical_grad(f, leaf, step)) for a, leaf in zip(analytic, leaves)]
    for leaf in leaves:
        leaf.zero_grad()
    return errors


def joint_gradient_error(f: Callable[[], Tensor], leaves: Iterable[Tensor],
                         step: float = 1e-5) -> tuple[float, list[int]]:
    """Relative error over the concatenated gradient of all leaves.

    Also returns the indices of leaves whose numeric gradient vanishes but
    whose analytic gradient does not; a leaf cut off from the loss must get
    zero up to round-off.
    """
    leaves = list(leaves)
    for leaf in leaves:
        leaf.zero_grad()
    f().backward()
    analytic = [leaf.grad.copy() for leaf in leaves]
    numeric = [numerical_grad(f, leaf, step) for leaf in leaves]
    for leaf in leaves:
        leaf.zero_grad()
    leaked = [n for n, (a, g) in enumerate(zip(analytic, numeric))
              if np.abs(g).max() < 1e-9 and np.abs(a).max() > 1e-12]
    flat = lambda parts: np.concatenate([p.ravel() for p in parts])
    return relative_error(flat(analytic), flat(numeric)), leaked
