"""``gnr`` command line: train | augment | predict | eval.

Every RunConfig field can be set with ``--config file`` and overridden with
``--key value``. ``GNR_SEED`` overrides the seed. Exit codes: 0 success,
1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, load_config
from .dataio import DataError, load_squad, to_squad
from .metrics import evaluate, evaluate_predictions, write_report
from .rng import RngStream
from .search import predict
from .train import NumericError, load_model, train
from .typeswaps import AugmentationError, build_inventory, sample_augmented

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("gnr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gnr", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help):
        c = sub.add_parser(name, help=help)
        c.add_argument("--config", help="key = value config file")
        return c

    command("train", "train a model; writes checkpoint, config and log to checkpoint_dir")
    c = command("augment", "write Type Swap examples in SQuAD format")
    c.add_argument("--count", type=int, help="number of swaps (default: augment_count)")
    c.add_argument("--output", required=True)
    c = command("predict", "decode questions with a trained checkpoint")
    c.add_argument("--input", required=True)
    c.add_argument("--output", required=True)
    c = command("eval", "score predictions or a checkpoint against a dataset")
    c.add_argument("--data", help="dataset to score (default: dev_path)")
    c.add_argument("--predictions", help="JSON map from predict; omit to decode with the checkpoint")
    c.add_argument("--output", help="JSONL report path")
    return p


def _split_overrides(extra: list[str]) -> dict[str, str]:
    overrides = {}
    it = iter(extra)
    for flag in it:
        if not flag.startswith("--") or len(flag) < 3:
            raise UsageError(f"unexpected argument {flag!r}")
        key = flag[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise UsageError(f"{flag} needs a value")
        overrides[key.replace("-", "_")] = value
    return overrides


def resolve_config(config_path: str | None, overrides: dict[str, str]) -> RunConfig:
    cfg = load_config(config_path, overrides)
    if os.environ.get("GNR_SEED"):
        try:
            cfg = cfg.replace(seed=int(os.environ["GNR_SEED"]))
        except ValueError:
            raise ConfigError(f"GNR_SEED must be an integer, got {os.environ['GNR_SEED']!r}") from None
    return cfg


def _write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def cmd_train(cfg: RunConfig) -> dict:
    if not cfg.train_path:
        raise ConfigError("train_path is required")
    result = train(cfg)
    summary = {"epochs": result.epochs_run, "checkpoint": str(result.checkpoint_path),
               "log": str(result.log_path),
               "best_dev": result.best_dev.to_json() if result.best_dev else None}
    print(json.dumps(summary, sort_keys=True))
    return summary


def cmd_augment(cfg: RunConfig, output: str, count: int | None = None) -> int:
    if not cfg.kb_path:
        raise AugmentationError("kb_path is required for augmentation")
    if not cfg.train_path:
        raise ConfigError("train_path is required")
    inv = build_inventory(cfg.kb_path)
    dataset, _ = load_squad(cfg.train_path)
    n = cfg.augment_count if count is None else count
    swapped = sample_augmented(dataset, inv, n, RngStream(cfg.seed).spawn(200))
    _write_json(output, to_squad(swapped, title="type-swaps"))
    print(f"wrote {len(swapped)} examples to {output}")
    return len(swapped)


def _read_questions(path: str):
    if not Path(path).is_file():
        raise DataError(f"cannot read {path}")
    if not Path(path).read_text(encoding="utf-8").strip():
        return []
    return load_squad(path, require_answers=False)[0]


def cmd_predict(cfg: RunConfig, input_path: str, output: str) -> dict:
    questions = _read_questions(input_path)
    preds = {}
    if questions:
        model = load_model(cfg.checkpoint_dir)
        for ex in questions:
            p = predict(model, ex, cfg.beam_width, cfg.normalization)
            preds[ex.id] = {"text": p.text, "prob": p.probability, "answer": list(p.answer)}
    _write_json(output, preds)
    return preds


def cmd_eval(cfg: RunConfig, data: str | None = None, predictions: str | None = None,
             output: str | None = None):
    path = data or cfg.dev_path
    if not path:
        raise ConfigError("pass --data or set dev_path")
    dataset, _ = load_squad(path)
    if predictions:
        try:
            preds = json.loads(Path(predictions).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read predictions {predictions}: {exc}") from exc
        metrics, scores = evaluate_predictions(dataset, preds)
    else:
        metrics, scores = evaluate(load_model(cfg.checkpoint_dir), dataset, cfg.beam_width,
                                   cfg.normalization)
    if output:
        write_report(output, metrics, scores)
    print(json.dumps(metrics.to_json(), sort_keys=True))
    return metrics


def main(argv: list[str] | None = None) -> int:
    try:
        args, extra = _parser().parse_known_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args.config, _split_overrides(extra))
        if args.command == "train":
            cmd_train(cfg)
        elif args.command == "augment":
            cmd_augment(cfg, args.output, args.count)
        elif args.command == "predict":
            cmd_predict(cfg, args.input, args.output)
        else:
            cmd_eval(cfg, args.data, args.predictions, args.output)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError, AugmentationError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
