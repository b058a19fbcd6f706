import json

import pytest
from hypothesis import given, strategies as st

from gnr.dataio import AnswerTuple, QAExample
from gnr.metrics import (Metrics, aggregate, evaluate, evaluate_predictions, exact_match, f1,
                         normalize_answer, score_example, sentence_score, write_report)

from conftest import tiny_model
from eval_fixtures import CASES


@pytest.mark.parametrize("pred,golds,p_tuple,g_tuple,em,f,sent", CASES)
def test_fixture_cases(pred, golds, p_tuple, g_tuple, em, f, sent):
    assert exact_match(pred, golds) == em
    assert f1(pred, golds) == pytest.approx(f, abs=1e-15)
    assert sentence_score(AnswerTuple(*p_tuple), AnswerTuple(*g_tuple)) == sent


def test_normalize_examples():
    assert normalize_answer("The Beatles!") == "beatles"
    assert normalize_answer("") == ""
    assert normalize_answer("  A  man,  a plan ") == "man plan"
    # articles survive inside words
    assert normalize_answer("Theatre") == "theatre"


@given(st.text(max_size=40))
def test_normalize_idempotent(text):
    once = normalize_answer(text)
    assert normalize_answer(once) == once


@given(st.text(max_size=20), st.lists(st.text(max_size=20), min_size=1, max_size=3))
def test_em_implies_f1(pred, golds):
    value = f1(pred, golds)
    assert 0.0 <= value <= 1.0
    if exact_match(pred, golds):
        assert value == 1.0


@given(st.text(alphabet="abc xyz", max_size=20))
def test_invariant_to_articles_and_punctuation(pred):
    golds = ["abc xyz"]
    decorated = f"The {pred}!?"
    assert exact_match(decorated, golds) == exact_match(pred, golds)
    assert f1(decorated, golds) == f1(pred, golds)


def test_empty_golds_rejected():
    with pytest.raises(ValueError):
        exact_match("x", [])
    with pytest.raises(ValueError):
        f1("x", [])
    with pytest.raises(ValueError):
        aggregate([])


def _two_examples():
    a = QAExample.build("a", "Ada visited Oslo . Kurt stayed home .", "Where did Ada go ?", "Oslo", 12)
    b = QAExample.build("b", "Ada visited Oslo . Kurt stayed home .", "Who stayed ?", "Kurt", 19)
    return [a, b]


def test_averaging_by_hand():
    a, b = _two_examples()
    metrics, scores = evaluate_predictions([a, b], {
        "a": {"text": "Oslo", "answer": [0, 2, 2]},
        "b": {"text": "visited", "answer": [0, 1, 1]},
    })
    assert metrics == Metrics(50.0, 50.0, 50.0, 2)
    assert [s.em for s in scores] == [1, 0]
    single, _ = evaluate_predictions([a], {"a": {"text": "Oslo", "answer": [0, 2, 2]}})
    assert single == Metrics(100.0, 100.0, 100.0, 1)


def test_missing_prediction_scores_zero():
    a, _ = _two_examples()
    metrics, _ = evaluate_predictions([a], {})
    assert metrics == Metrics(0.0, 0.0, 0.0, 1)


def test_evaluate_is_mean_of_examples_and_deterministic(tmp_path):
    data = _two_examples()
    model = tiny_model(data, hidden=3, dim=4)
    m1, s1 = evaluate(model, data, 4)
    m2, s2 = evaluate(model, data, 4)
    assert m1 == m2 and s1 == s2
    assert m1.exact_match == pytest.approx(100 * sum(s.em for s in s1) / 2)
    assert m1.f1 >= m1.exact_match
    write_report(tmp_path / "r1.jsonl", m1, s1)
    write_report(tmp_path / "r2.jsonl", m2, s2)
    assert (tmp_path / "r1.jsonl").read_bytes() == (tmp_path / "r2.jsonl").read_bytes()
    lines = (tmp_path / "r1.jsonl").read_text().splitlines()
    assert len(lines) == 3 and json.loads(lines[-1])["count"] == 2


def test_score_example_uses_all_golds():
    ex = QAExample.build("g", "Oslo Norway is cold .", "Where ?", "Oslo Norway", 0,
                         answers=["Oslo Norway", "Oslo"])
    s = score_example(ex, "Oslo", AnswerTuple(0, 0, 0))
    assert (s.em, s.f1, s.sentence) == (1, 1.0, 1)
