"""Run configuration: a flat ``key = value`` file plus ``--key value`` overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .model import ModelConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # model
    depth: int = 3
    hidden: int = 200
    embedding_dim: int = 300
    mlp_hidden: int = 200
    end_depth: int = 1
    recurrent_dropout: float = 0.3
    fc_dropout: float = 0.4
    noise_sigma: float = 1e-6
    max_doc_tokens: int = 1000
    # optimizer
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    # search
    beam_width: int = 32
    normalization: str = "global"
    # augmentation
    augment_count: int = 10_000
    kb_path: str = ""
    # data and output
    train_path: str = ""
    dev_path: str = ""
    word_vectors: str = ""
    checkpoint_dir: str = "checkpoints"
    # schedule
    seed: int = 0
    epochs: int = 30
    patience: int = 5
    stop_em: float = 100.0

    def __post_init__(self):
        if self.normalization not in ("local", "global"):
            raise ConfigError(f"normalization must be local or global, not {self.normalization!r}")
        if self.beam_width < 1 or self.batch_size < 1 or self.depth < 1 or self.hidden < 1:
            raise ConfigError("beam_width, batch_size, depth and hidden must be positive")
        if self.augment_count < 0:
            raise ConfigError("augment_count must be >= 0")

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.depth, self.hidden, self.embedding_dim, self.mlp_hidden,
                           self.end_depth, self.recurrent_dropout, self.fc_dropout,
                           self.max_doc_tokens)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {value if f.type == 'str' else repr(value)}\n")
        return "".join(lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _FIELDS[key].type
    try:
        if kind == "int":
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = _coerce(key, raw)
    return values


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    for key, raw in (overrides or {}).items():
        values[key] = _coerce(key, raw)
    return RunConfig(**values)
