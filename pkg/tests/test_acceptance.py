"""Acceptance criteria 1-10, one printed PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v`` (or ``python tests/test_acceptance.py``).
"""

import math
import time

import numpy as np
import pytest

from gnr import cli
from gnr import tensor as T
from gnr.config import RunConfig
from gnr.dataio import AnswerTuple, QAExample, examples_from_squad
from gnr.gradcheck import check_gradients, joint_gradient_error
from gnr.metrics import exact_match, f1, sentence_score
from gnr.rng import RngStream
from gnr.search import (FixedScores, ModelScores, Stage, all_answers, beam_decode, beam_objective,
                        beam_search, exact_log_partition, global_path_probabilities,
                        local_log_prob, local_path_probabilities, predict, score_sentences,
                        train_step)
from gnr.synthetic import make_task
from gnr.train import train, vocabulary
from gnr.typeswaps import (SwapRejected, TypeInventory, build_inventory, count_swap_documents,
                           generate_swap)

from conftest import tiny_model
from eval_fixtures import CASES
from test_typeswaps import BRUTE_CASES, TOY_KB, check_swap_invariants, enumerate_rewrites

GRAD_TOL = 1e-4


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


WORDS = ["ada", "oslo", "kurt", "home", "river", "blue", "went", "saw", "old", "tree", "north"]


def toy_documents(n=200, seed=0):
    """Random documents of 1-3 sentences with at most 5 tokens each, plus a question."""
    rng = RngStream(seed)
    docs = []
    for d in range(n):
        sentences = []
        for _ in range(rng.integers(1, 4)):
            words = [rng.choice(WORDS) for _ in range(rng.integers(1, 5))]
            words[0] = words[0].capitalize()
            sentences.append(" ".join(words) + " .")
        context = " ".join(sentences)
        question = " ".join(rng.choice(WORDS) for _ in range(3)) + " ?"
        docs.append(QAExample.build(f"toy-{d}", context, question))
    return docs


@pytest.fixture(scope="module")
def toy_set():
    docs = toy_documents()
    model = tiny_model(docs, hidden=4, dim=5, depth=1)
    sources = [ModelScores(model.encode(ex).document, model.params) for ex in docs]
    return docs, model, sources


def brute_log_partition(source):
    scores = []
    sent = source.sentences().data
    for i, j, k in all_answers(source.lengths):
        scores.append(sent[i] + source.starts(i).data[j] + source.ends(i, j).data[k - j])
    scores = np.array(scores)
    return scores.max() + math.log(np.exp(scores - scores.max()).sum()), scores


# 1 -----------------------------------------------------------------------------------

def test_criterion_01_gradient_suite(capsys):
    start = time.time()
    rng = RngStream(0)
    p = lambda *s: T.parameter(rng.normal(s))
    a, b, m, v, w = p(3, 4), p(3, 4), p(4, 2), p(5), p(3, 1)
    x, wx, wh, bias = p(4, 3), p(3, 8), p(2, 8), p(8)
    primitives = {
        "add": (lambda: T.total(T.tanh(a + w)), [a, w]),
        "sub": (lambda: T.total(T.tanh(a - b)), [a, b]),
        "mul": (lambda: T.total(a * b), [a, b]),
        "scale": (lambda: T.total(T.tanh(T.scale(v, -1.5))), [v]),
        "matmul": (lambda: T.total(T.tanh(a @ m)), [a, m]),
        "transpose": (lambda: T.total(T.tanh(a.T @ b)), [a, b]),
        "reshape": (lambda: T.total(T.tanh(T.reshape(a, (4, 3)) @ a)), [a]),
        "take": (lambda: T.total(T.tanh(a[[0, 0, 2], 1:])), [a]),
        "concat": (lambda: T.total(T.tanh(T.concat([a, b], axis=1))), [a, b]),
        "stack": (lambda: T.log_sum_exp(T.stack([v[0] * v[1], v[4]])), [v]),
        "relu": (lambda: T.total(T.relu(v) * v), [v]),
        "sigmoid": (lambda: T.total(T.sigmoid(v) * v), [v]),
        "tanh": (lambda: T.total(T.tanh(v) * v), [v]),
        "softmax": (lambda: T.total(T.softmax(a, axis=1) * b), [a, b]),
        "log_softmax": (lambda: T.log_softmax(v)[3], [v]),
        "log_sum_exp": (lambda: T.log_sum_exp(v), [v]),
        "lstm_sequence": (lambda: T.total(T.tanh(T.lstm_sequence(x, wx, wh, bias))), [x, wx, wh, bias]),
        "lstm_sequence_rev": (lambda: T.total(T.lstm_sequence(x, wx, wh, bias, reverse=True)),
                              [x, wx, wh, bias]),
    }
    worst = {name: max(check_gradients(f, leaves)) for name, (f, leaves) in primitives.items()}

    ex = QAExample.build("toy", "Ada visited Oslo . Kurt stayed home .", "Where did Ada go ?",
                         "Oslo", 12)
    assert ex.document.lengths == [4, 4]
    model = tiny_model([ex], hidden=4, dim=5, depth=2)
    for width in (1, 3):
        loss = lambda: beam_objective(ModelScores(model.encode(ex).document, model.params),
                                      ex.answer, width).loss
        err, leaked = joint_gradient_error(loss, model.params.params.values())
        worst[f"global_loss_B{width}"] = err if not leaked else math.inf
    elapsed = time.time() - start
    name, err = max(worst.items(), key=lambda kv: kv[1])
    ok = err <= GRAD_TOL and elapsed < 60
    report(capsys, 1, ok, f"{len(worst)} checks, worst {name} rel err {err:.2e}, "
                          f"{model.params.count()} model params, {elapsed:.1f}s")


# 2 -----------------------------------------------------------------------------------

def test_criterion_02_partition_oracle(capsys, toy_set):
    docs, _, sources = toy_set
    worst, argmax_ok = 0.0, True
    for src in sources:
        brute, scores = brute_log_partition(src)
        n = len(scores)
        beam = beam_decode(src, n)
        worst = max(worst, abs(beam.log_partition() - brute) / abs(brute),
                    abs(exact_log_partition(src).item() - brute) / abs(brute))
        answers = list(all_answers(src.lengths))
        best = min(range(n), key=lambda q: (-scores[q], answers[q]))
        argmax_ok &= beam.top.path == tuple(answers[best])
    ok = worst <= 1e-9 and argmax_ok
    report(capsys, 2, ok, f"{len(docs)} docs, max rel |logZ_beam - logZ_exact| {worst:.1e}, "
                          f"top-1 == argmax: {argmax_ok}")


# 3 -----------------------------------------------------------------------------------

def test_criterion_03_normalization_semantics(capsys, toy_set):
    _, _, sources = toy_set
    worst_sum, monotone = 0.0, True
    for src in sources:
        answers = list(all_answers(src.lengths))
        total = sum(math.exp(local_log_prob(a, src).item()) for a in answers)
        worst_sum = max(worst_sum, abs(total - 1.0))
        for a in answers:
            c = local_path_probabilities(a, src)
            monotone &= c[0] >= c[1] >= c[2]
    end_b = math.log(0.64 * 0.51 / (0.49 * 0.36))
    fig = FixedScores([math.log(0.51), math.log(0.49)], [[0.0], [0.0]],
                      {(0, 0): [0.0], (1, 0): [end_b]})
    probs = global_path_probabilities((1, 0, 0), beam_search(fig, 2))
    fig_ok = abs(probs[0] - 0.49) < 1e-12 and abs(probs[2] - 0.64) < 1e-12 and probs[2] > probs[0]
    ok = worst_sum <= 1e-9 and monotone and fig_ok
    report(capsys, 3, ok, f"max |sum P_local - 1| {worst_sum:.1e}, local monotone: {monotone}, "
                          f"rigged global sentence {probs[0]:.2f} -> final {probs[2]:.2f}")


# 4 -----------------------------------------------------------------------------------

def test_criterion_04_early_update(capsys):
    # hand-set scores: gold sentence 2 ranks third with width 2
    src = FixedScores([1.0, 0.5, -0.3], [[0.2, 0.1], [0.0], [0.4, -1.0]],
                      {(0, 0): [0.1, 0.2], (0, 1): [0.3], (1, 0): [0.0],
                       (2, 0): [2.0, 0.5], (2, 1): [0.7]}, requires_grad=True)
    obj = beam_objective(src, (2, 0, 1), 2)
    obj.loss.backward()
    hand = math.log(math.exp(1.0) + math.exp(0.5) + math.exp(-0.3)) - (-0.3)
    fixed_err = abs(obj.loss.item() - hand)
    fixed_zero = all(not l.grad.any() for l in [*src.start_leaves, *src.end_leaves.values()])

    # same situation through train_step on a model
    ex = QAExample.build("m", "Ada visited Oslo . Kurt stayed home . Rosa left early .",
                         "Who stayed home ?", "Kurt", 19)
    model = tiny_model([ex], hidden=4, dim=5)
    sent = score_sentences(model.encode(ex).document, model.params).data
    top = int(np.argmax(sent))
    gold = next(i for i in range(3) if i != top)
    ex.answer = AnswerTuple(gold, 0, 0)
    model.params.zero_grad()
    step = train_step(model, ex, 1, "global", RngStream(0), training=False)
    hi = max(sent[top], sent[gold])
    hand_model = hi + math.log(math.exp(sent[top] - hi) + math.exp(sent[gold] - hi)) - sent[gold]
    model_err = abs(step.loss - hand_model)
    later = [n for n in model.params if n.startswith(("start/", "end/"))]
    model_zero = all(not model.params[n].grad.any() for n in later)
    ok = (obj.falloff == Stage.SENTENCE and step.falloff == Stage.SENTENCE and fixed_err <= 1e-10
          and model_err <= 1e-10 and fixed_zero and model_zero)
    report(capsys, 4, ok, f"fixture loss err {fixed_err:.1e}, train_step loss err {model_err:.1e}, "
                          f"stage-2/3 grads zero: {fixed_zero and model_zero} ({len(later)} params)")


# 5 -----------------------------------------------------------------------------------

def test_criterion_05_conditional_computation(capsys, toy_set):
    docs, model, _ = toy_set
    worst = 0.0
    decodes = 0
    for ex in docs:
        for width in (1, 2, 4, 8):
            p = predict(model, ex, width)
            worst = max(worst, p.end_calls / width)
            decodes += 1
    ex = QAExample.build("t", "Ada visited Oslo . Kurt stayed home .", "Where ?", "Oslo", 12)
    trained = tiny_model([ex], hidden=4, dim=5)
    for width in (1, 2, 4):
        step = train_step(trained, ex, width, "global", RngStream(0), training=False)
        worst = max(worst, step.end_calls / width)
        decodes += 1
    report(capsys, 5, worst <= 1.0, f"{decodes} decodes, max end-scorer calls / B = {worst:.2f}")


# 6 -----------------------------------------------------------------------------------

def overfit_config(directory, paths, normalization, width):
    return RunConfig(depth=1, hidden=16, embedding_dim=16, mlp_hidden=16, recurrent_dropout=0.0,
                     fc_dropout=0.0, noise_sigma=0.0, lr=0.01, batch_size=5, beam_width=width,
                     normalization=normalization, augment_count=0, train_path=str(paths["train"]),
                     dev_path=str(paths["train"]), word_vectors=str(paths["vectors"]),
                     checkpoint_dir=str(directory), epochs=200, patience=200, seed=0)


def test_criterion_06_overfit(capsys, tmp_path):
    task = make_task(50, seed=0)
    paths = task.write(tmp_path / "data")
    data, _ = examples_from_squad(task.train)
    vocab = len(vocabulary(data, None))
    start = time.time()
    results = {}
    for label, norm, width in [("local", "local", 1), ("global", "global", 32),
                               ("global B=2", "global", 2)]:
        r = train(overfit_config(tmp_path / label.replace(" ", ""), paths, norm, width))
        results[label] = (r.best_dev.exact_match, r.epochs_run)
    elapsed = time.time() - start
    ok = (len(data) == 50 and vocab <= 100 and elapsed < 300
          and all(em == 100.0 for em, _ in results.values()))
    detail = ", ".join(f"{k}: EM {em:.0f} in {n} ep" for k, (em, n) in results.items())
    report(capsys, 6, ok, f"vocab {vocab}; {detail}; {elapsed:.1f}s")


# 7 -----------------------------------------------------------------------------------

def test_criterion_07_type_swaps(capsys):
    task = make_task(100, seed=4)
    data, _ = examples_from_squad(task.train)
    inv = TypeInventory.from_pairs(l.split("\t") for l in task.kb_lines)
    rng = RngStream(7)
    accepted = []
    tries = 0
    while len(accepted) < 1000:
        ex = data[tries % len(data)]
        tries += 1
        try:
            accepted.append((ex, generate_swap(ex, inv, rng)))
        except SwapRejected:
            continue
    failures = 0
    for ex, out in accepted:
        try:
            check_swap_invariants(ex, out, inv)
        except AssertionError:
            failures += 1
    kb = build_inventory(TOY_KB)
    counts = []
    for context, question, answer in BRUTE_CASES:
        ex = QAExample.build("b", context, question, answer)
        counts.append((count_swap_documents(ex, kb), len(enumerate_rewrites(ex, kb))))
    ok = failures == 0 and all(a == b for a, b in counts)
    report(capsys, 7, ok, f"{len(accepted)} swaps ({tries} tries), {failures} invariant failures; "
                          f"count vs enumeration {counts}")


# 8 -----------------------------------------------------------------------------------

def test_criterion_08_eval_fixtures(capsys):
    wrong = []
    for n, (pred, golds, pt, gt, em, f, sent) in enumerate(CASES):
        got = (exact_match(pred, golds), f1(pred, golds),
               sentence_score(AnswerTuple(*pt), AnswerTuple(*gt)))
        if got[0] != em or abs(got[1] - f) > 1e-15 or got[2] != sent:
            wrong.append((n, got))
    report(capsys, 8, not wrong and len(CASES) == 10,
           f"{len(CASES)} cases, mismatches: {wrong or 'none'}")


# 9 -----------------------------------------------------------------------------------

def trend_config(directory, paths, seed, count):
    return RunConfig(depth=1, hidden=16, embedding_dim=16, mlp_hidden=16, recurrent_dropout=0.0,
                     fc_dropout=0.0, noise_sigma=0.0, lr=0.01, batch_size=10, beam_width=4,
                     normalization="global", augment_count=count, kb_path=str(paths["kb"]),
                     train_path=str(paths["train"]), dev_path=str(paths["dev"]),
                     word_vectors=str(paths["vectors"]), checkpoint_dir=str(directory),
                     epochs=3, patience=3, seed=seed)


def test_criterion_09_augmentation_trend(capsys, tmp_path):
    rows = []
    for seed in range(5):
        # loose type clusters, so held-out names are not trivially close to training ones
        paths = make_task(500, 100, seed=seed, held_out=True, spread=2.0).write(tmp_path / f"d{seed}")
        base = train(trend_config(tmp_path / f"base{seed}", paths, seed, 0)).best_dev.exact_match
        aug = train(trend_config(tmp_path / f"aug{seed}", paths, seed, 250)).best_dev.exact_match
        rows.append((seed, base, aug))
    wins = sum(aug >= base for _, base, aug in rows)
    detail = "; ".join(f"seed {s}: T=0 {b:.0f} vs T=250 {a:.0f}" for s, b, a in rows)
    report(capsys, 9, wins >= 4, f"{wins}/5 seeds with T>0 >= T=0 ({detail})")


# 10 ----------------------------------------------------------------------------------

def test_criterion_10_determinism(capsys, tmp_path):
    paths = make_task(20, 8, seed=1, held_out=True).write(tmp_path / "data")
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        code = cli.main(["train", "--train_path", str(paths["train"]), "--dev_path",
                         str(paths["dev"]), "--word_vectors", str(paths["vectors"]),
                         "--kb_path", str(paths["kb"]), "--augment_count", "10", "--depth", "1",
                         "--hidden", "8", "--embedding_dim", "16", "--mlp_hidden", "8",
                         "--epochs", "2", "--beam_width", "4", "--batch_size", "5",
                         "--checkpoint_dir", str(out), "--seed", "42"])
        assert code == 0
        outputs.append(out)
    same = {name: (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
            for name in ("train_log.jsonl", "model.ckpt")}
    report(capsys, 10, all(same.values()), f"byte-identical with dropout and noise on: {same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
