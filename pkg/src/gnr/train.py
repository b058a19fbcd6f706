"""Training loop: original data plus freshly sampled Type Swaps every epoch."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import RunConfig, load_config
from .dataio import QAExample, load_squad
from .encoders import WordVectorTable
from .metrics import Metrics, evaluate
from .model import GNR
from .optim import adam_step, weight_noise
from .rng import RngStream
from .search import train_step
from .synthetic import make_vectors
from .typeswaps import TypeInventory, build_inventory, sample_augmented

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.ckpt"
LOG_NAME = "train_log.jsonl"
CONFIG_NAME = "config.txt"
VECTORS_NAME = "vectors.txt"


class NumericError(RuntimeError):
    pass


@dataclass
class TrainResult:
    model: GNR
    best_dev: Metrics | None
    epochs_run: int
    log_path: Path
    checkpoint_path: Path


def vocabulary(examples: list[QAExample], inv: TypeInventory | None) -> list[str]:
    tokens = set()
    for ex in examples:
        tokens.update(ex.document.tokens)
        tokens.update(ex.question_tokens)
    if inv is not None:
        for toks, _ in (e for entries in inv.index().values() for e in entries):
            tokens.update(toks)
    return sorted(tokens)


def load_model(directory: str | Path, config: RunConfig | None = None) -> GNR:
    """Rebuild a model from a checkpoint directory written by :func:`train`."""
    d = Path(directory)
    cfg = config or load_config(d / CONFIG_NAME)
    table = WordVectorTable.load(cfg.word_vectors)
    model = GNR.create(cfg.model_config(), table, RngStream(cfg.seed))
    checkpoint.load(model.params, d / CHECKPOINT_NAME)
    return model


def run_epoch(model: GNR, examples: list[QAExample], cfg: RunConfig, rng: RngStream) -> dict:
    order = rng.permutation(len(examples))
    losses, falloffs = [], 0
    for lo in range(0, len(order), cfg.batch_size):
        batch = [examples[n] for n in order[lo: lo + cfg.batch_size]]
        with weight_noise(model.params, cfg.noise_sigma, rng):
            for ex in batch:
                step = train_step(model, ex, cfg.beam_width, cfg.normalization, rng,
                                  scale=1.0 / len(batch))
                if not math.isfinite(step.loss):
                    raise NumericError(f"non-finite loss {step.loss} on example {ex.id}")
                losses.append(step.loss)
                falloffs += step.falloff is not None and step.falloff < 3
        adam_step(model.params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    return {"mean_loss": float(np.mean(losses)) if losses else 0.0, "early_updates": falloffs}


def train(cfg: RunConfig) -> TrainResult:
    out = Path(cfg.checkpoint_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = RngStream(cfg.seed)

    train_set, report = load_squad(cfg.train_path)
    log.info("train ingestion: %s", report.to_json())
    dev_set = load_squad(cfg.dev_path)[0] if cfg.dev_path else train_set
    inv = build_inventory(cfg.kb_path) if cfg.augment_count > 0 else None

    if cfg.word_vectors:
        table = WordVectorTable.load(cfg.word_vectors)
    else:
        table = make_vectors(vocabulary(train_set + dev_set, inv), {}, cfg.embedding_dim,
                             rng.spawn(1))
        table.save(out / VECTORS_NAME)
        cfg = cfg.replace(word_vectors=str(out / VECTORS_NAME))
    cfg.save(out / CONFIG_NAME)

    model = GNR.create(cfg.model_config(), table, rng.spawn(2))
    log_path, ckpt_path = out / LOG_NAME, out / CHECKPOINT_NAME
    best, stale, epoch = None, 0, 0
    with open(log_path, "w", encoding="utf-8") as fh:
        for epoch in range(1, cfg.epochs + 1):
            epoch_rng = rng.spawn(100, epoch)
            augmented = sample_augmented(train_set, inv, cfg.augment_count, epoch_rng.spawn(0)) \
                if inv is not None else []
            stats = run_epoch(model, train_set + augmented, cfg, epoch_rng)
            dev, _ = evaluate(model, dev_set, cfg.beam_width, cfg.normalization)
            record = {"epoch": epoch, "examples": len(train_set), "augmented": len(augmented),
                      **stats, "dev_em": dev.exact_match, "dev_f1": dev.f1,
                      "dev_sentence": dev.sentence_accuracy}
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()
            log.info("epoch %d: %s", epoch, record)
            if best is None or dev.exact_match > best.exact_match:
                best, stale = dev, 0
                checkpoint.save(model.params, ckpt_path)
            else:
                stale += 1
            if dev.exact_match >= cfg.stop_em or stale >= cfg.patience:
                break
    return TrainResult(model, best, epoch, log_path, ckpt_path)
