import json
import math

import pytest

from gnr import cli, train as train_mod
from gnr.checkpoint import read_records
from gnr.config import ConfigError, RunConfig, load_config, parse_config_text
from gnr.dataio import load_squad
from gnr.search import StepResult, predict
from gnr.synthetic import make_task

SMALL = ["--depth", "1", "--hidden", "6", "--embedding_dim", "16", "--mlp_hidden", "6",
         "--batch_size", "5", "--beam_width", "3", "--noise_sigma", "1e-6"]


@pytest.fixture
def task(tmp_path):
    paths = make_task(12, 6, seed=2, held_out=True).write(tmp_path / "data")
    return {k: str(v) for k, v in paths.items()}


def data_args(task):
    return ["--train_path", task["train"], "--dev_path", task["dev"],
            "--word_vectors", task["vectors"], "--kb_path", task["kb"]]


def test_defaults_are_full_size_regime():
    c = RunConfig()
    assert (c.depth, c.hidden, c.embedding_dim) == (3, 200, 300)
    assert (c.recurrent_dropout, c.fc_dropout, c.noise_sigma) == (0.3, 0.4, 1e-6)
    assert (c.lr, c.beta1, c.beta2, c.eps, c.batch_size) == (5e-4, 0.9, 0.999, 1e-8, 32)
    assert (c.beam_width, c.normalization, c.augment_count) == (32, "global", 10_000)


def test_config_round_trip(tmp_path):
    c = RunConfig(hidden=7, lr=0.01, normalization="local", kb_path="a b.tsv", seed=9)
    c.save(tmp_path / "c.txt")
    assert load_config(tmp_path / "c.txt") == c
    assert RunConfig(**parse_config_text(RunConfig().to_text())) == RunConfig()


def test_config_overrides_and_errors(tmp_path):
    (tmp_path / "c.txt").write_text("hidden = 8  # comment\nlr = 1e-3\n")
    c = load_config(tmp_path / "c.txt", {"hidden": "9", "augment_count": "0"})
    assert (c.hidden, c.lr, c.augment_count) == (9, 1e-3, 0)
    with pytest.raises(ConfigError):
        load_config(None, {"colour": "red"})
    with pytest.raises(ConfigError):
        load_config(None, {"hidden": "many"})
    with pytest.raises(ConfigError):
        load_config(None, {"normalization": "both"})
    with pytest.raises(ConfigError):
        parse_config_text("just words")


def test_usage_exit_codes(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["fly"]) == cli.EXIT_USAGE
    assert cli.main(["train", "--nonsense", "1"]) == cli.EXIT_USAGE
    assert cli.main(["train", "--hidden"]) == cli.EXIT_USAGE
    assert cli.main(["train"]) == cli.EXIT_USAGE


def test_data_error_exit_code(tmp_path):
    assert cli.main(["train", "--train_path", str(tmp_path / "none.json")]) == cli.EXIT_DATA
    assert cli.main(["augment", "--train_path", "x", "--output", str(tmp_path / "o")]) == cli.EXIT_DATA
    assert cli.main(["predict", "--checkpoint_dir", str(tmp_path), "--input",
                     str(tmp_path / "nothing.json"), "--output", str(tmp_path / "p")]) == cli.EXIT_DATA


def test_numeric_failure_exit_code(task, tmp_path, monkeypatch):
    monkeypatch.setattr(train_mod, "train_step",
                        lambda *a, **k: StepResult(math.nan, None, 0))
    args = ["train", *data_args(task), *SMALL, "--checkpoint_dir", str(tmp_path / "ck"),
            "--epochs", "1"]
    assert cli.main(args) == cli.EXIT_NUMERIC


def test_gnr_seed_env(monkeypatch):
    monkeypatch.setenv("GNR_SEED", "77")
    assert cli.resolve_config(None, {"seed": "3"}).seed == 77
    monkeypatch.setenv("GNR_SEED", "x")
    with pytest.raises(ConfigError):
        cli.resolve_config(None, {})


def run_train(task, out, *extra):
    args = ["train", *data_args(task), *SMALL, "--checkpoint_dir", str(out), "--epochs", "2",
            "--augment_count", "4", *extra]
    assert cli.main(args) == 0
    return out


def test_train_determinism(task, tmp_path):
    a = run_train(task, tmp_path / "a")
    b = run_train(task, tmp_path / "b")
    for name in ("train_log.jsonl", "model.ckpt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = run_train(task, tmp_path / "c", "--seed", "1")
    assert (a / "model.ckpt").read_bytes() != (c / "model.ckpt").read_bytes()
    log = [json.loads(l) for l in (a / "train_log.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in log] == [1, 2] and all(r["augmented"] == 4 for r in log)
    assert "adam/step" in read_records((a / "model.ckpt").read_bytes())


def test_train_without_augmentation_or_vectors(task, tmp_path):
    args = ["train", "--train_path", task["train"], *SMALL, "--checkpoint_dir",
            str(tmp_path / "ck"), "--epochs", "1", "--augment_count", "0"]
    assert cli.main(args) == 0
    log = json.loads((tmp_path / "ck" / "train_log.jsonl").read_text())
    assert log["augmented"] == 0
    assert (tmp_path / "ck" / "vectors.txt").is_file()
    saved = load_config(tmp_path / "ck" / "config.txt")
    assert saved.word_vectors == str(tmp_path / "ck" / "vectors.txt")


def test_patience_stops_early(task, tmp_path, monkeypatch):
    cfg = load_config(None, dict(zip([a[2:] for a in SMALL[::2]], SMALL[1::2])))
    cfg = cfg.replace(train_path=task["train"], dev_path=task["dev"], word_vectors=task["vectors"],
                      augment_count=0, epochs=10, patience=1, lr=0.0,
                      checkpoint_dir=str(tmp_path / "ck"))
    result = train_mod.train(cfg)
    assert result.epochs_run == 2


def test_predict_eval_augment(task, tmp_path):
    ck = run_train(task, tmp_path / "ck")
    preds_path = tmp_path / "p.json"
    common = ["--checkpoint_dir", str(ck), "--beam_width", "4"]
    assert cli.main(["predict", *common, "--input", task["dev"], "--output", str(preds_path)]) == 0
    preds = json.loads(preds_path.read_text())
    dev, _ = load_squad(task["dev"])
    assert set(preds) == {e.id for e in dev}
    assert all(0 < p["prob"] <= 1 for p in preds.values())

    report = tmp_path / "r.jsonl"
    assert cli.main(["eval", *common, "--data", task["dev"], "--predictions", str(preds_path),
                     "--output", str(report)]) == 0
    from_preds = json.loads(report.read_text().splitlines()[-1])
    assert cli.main(["eval", *common, "--data", task["dev"], "--output", str(report)]) == 0
    assert json.loads(report.read_text().splitlines()[-1]) == from_preds

    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"version": "1.1", "data": []}))
    assert cli.main(["predict", *common, "--input", str(empty), "--output", str(preds_path)]) == 0
    assert json.loads(preds_path.read_text()) == {}

    out = tmp_path / "aug.json"
    assert cli.main(["augment", *data_args(task), "--count", "7", "--output", str(out)]) == 0
    augmented, report_ = load_squad(out)
    assert len(augmented) == 7 and report_.dropped == 0


def test_wider_beam_reaches_exhaustive_maximum(task, tmp_path):
    ck = run_train(task, tmp_path / "ck")
    model = train_mod.load_model(ck)
    dev, _ = load_squad(task["dev"])
    for ex in dev:
        exhaustive = predict(model, ex, 10_000)
        for width in (1, 2, 32):
            assert predict(model, ex, width).score <= exhaustive.score + 1e-12
