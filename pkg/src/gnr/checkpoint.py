"""Flat binary checkpoints.

Layout: the magic ``GNRCKPT1`` followed by records of
``u64 name_len | name (utf-8) | u64 rank | u64 dims[rank] | f32 values``,
all little-endian. Adam moments use the parameter name with a ``/m`` or
``/v`` suffix; the optimizer step count is the record ``adam/step``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .optim import ParameterStore

MAGIC = b"GNRCKPT1"
STEP_KEY = "adam/step"


class CheckpointError(ValueError):
    pass


def _record(name: str, array: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    head = struct.pack("<Q", len(raw)) + raw + struct.pack("<Q", array.ndim)
    head += struct.pack(f"<{array.ndim}Q", *array.shape)
    return head + np.ascontiguousarray(array, dtype="<f4").tobytes()


def to_bytes(store: ParameterStore) -> bytes:
    parts = [MAGIC]
    for name, p in store.items():
        parts.append(_record(name, p.data))
    for name in store.params:
        if name in store.m:
            parts.append(_record(name + "/m", store.m[name]))
            parts.append(_record(name + "/v", store.v[name]))
    parts.append(_record(STEP_KEY, np.array([store.step])))
    return b"".join(parts)


def read_records(blob: bytes) -> dict[str, np.ndarray]:
    if not blob.startswith(MAGIC):
        raise CheckpointError("not a GNR checkpoint (bad magic)")
    pos = len(MAGIC)
    out: dict[str, np.ndarray] = {}
    try:
        while pos < len(blob):
            (n,) = struct.unpack_from("<Q", blob, pos)
            pos += 8
            name = blob[pos: pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<Q", blob, pos)
            pos += 8
            dims = struct.unpack_from(f"<{rank}Q", blob, pos)
            pos += 8 * rank
            count = int(np.prod(dims)) if rank else 1
            if pos + 4 * count > len(blob):
                raise CheckpointError(f"truncated record {name!r}")
            values = np.frombuffer(blob, dtype="<f4", count=count, offset=pos)
            pos += 4 * count
            out[name] = values.astype(np.float64).reshape(dims)
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    return out


def save(store: ParameterStore, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(store))


def load(store: ParameterStore, path: str | Path) -> None:
    """Fill ``store`` (already built with the right names and shapes) from ``path``."""
    records = read_records(Path(path).read_bytes())
    for name, p in store.items():
        if name not in records:
            raise CheckpointError(f"checkpoint lacks parameter {name!r}")
        if records[name].shape != p.shape:
            raise CheckpointError(
                f"parameter {name!r}: checkpoint shape {records[name].shape} != model {p.shape}"
            )
        p.data[...] = records[name]
        if name + "/m" in records:
            store.m[name] = records[name + "/m"].copy()
            store.v[name] = records[name + "/v"].copy()
    if STEP_KEY in records:
        store.step = int(records[STEP_KEY][0])
