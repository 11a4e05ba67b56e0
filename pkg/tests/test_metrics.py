from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utcnn.metrics import aggregate_cv, evaluate

S, N, U = 0, 1, 2


def brute_force(gold, pred, C):
    """Pair-by-pair tally, then the textbook definitions in plain Python."""
    tp, n_pred, n_gold = [0] * C, [0] * C, [0] * C
    for g, p in zip(gold, pred):
        n_gold[g] += 1
        n_pred[p] += 1
        if g == p:
            tp[g] += 1
    prec = [tp[c] / n_pred[c] if n_pred[c] else 0.0 for c in range(C)]
    rec = [tp[c] / n_gold[c] if n_gold[c] else 0.0 for c in range(C)]
    mp, mr = sum(prec) / C, sum(rec) / C
    f1 = 0.0 if mp + mr == 0 else 2 * mp * mr / (mp + mr)
    return prec, rec, mp, mr, f1, sum(tp) / len(gold)


def test_hand_computed_example():
    r = evaluate([S, S, N, N, U], [S, N, N, N, U], 3)
    assert abs(r.macro_p - 8 / 9) <= 1e-12
    assert abs(r.macro_r - 5 / 6) <= 1e-12
    assert abs(r.f1_snu - 80 / 93) <= 1e-12
    assert round(r.f1_snu, 3) == 0.860


def test_perfect_predictions():
    r = evaluate([0, 1, 2, 1], [0, 1, 2, 1], 3)
    assert r.macro_p == r.macro_r == r.f1_snu == r.macro_f1 == r.accuracy == 1.0


def test_single_class_predictions():
    gold = [0, 1, 1, 1, 2]
    r = evaluate(gold, [1] * 5, 3)
    assert r.precision[0] == r.recall[0] == r.precision[2] == r.recall[2] == 0.0
    assert r.accuracy == pytest.approx(3 / 5)
    # the majority baseline scores exactly the majority share
    assert r.accuracy == max(np.bincount(gold)) / len(gold)


def test_f1_snu_is_not_mean_of_class_f():
    r = evaluate([S, S, N, N, U], [S, N, N, N, U], 3)
    assert r.macro_f1 != pytest.approx(r.f1_snu)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 5).flatmap(
    lambda C: st.tuples(st.just(C), st.lists(st.tuples(st.integers(0, C - 1), st.integers(0, C - 1)),
                                             min_size=1, max_size=60))))
def test_matches_brute_force(case):
    C, pairs = case
    gold, pred = [g for g, _ in pairs], [p for _, p in pairs]
    r = evaluate(gold, pred, C)
    prec, rec, mp, mr, f1, acc = brute_force(gold, pred, C)
    assert r.precision.tolist() == prec and r.recall.tolist() == rec
    assert (r.macro_p, r.macro_r, r.f1_snu, r.accuracy) == (mp, mr, f1, acc)
    assert r.confusion.sum() == r.n == len(gold)
    # exact rational check of the headline score
    fp = sum(Fraction(int(r.confusion[c, c]), int(r.confusion[:, c].sum())) for c in range(C)
             if r.confusion[:, c].sum()) / C
    fr = sum(Fraction(int(r.confusion[c, c]), int(r.confusion[c].sum())) for c in range(C)
             if r.confusion[c].sum()) / C
    exact = 0 if fp + fr == 0 else 2 * fp * fr / (fp + fr)
    assert abs(r.f1_snu - float(exact)) <= 1e-15


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=40),
       st.permutations([0, 1, 2]))
def test_relabel_invariance(pairs, perm):
    gold, pred = [g for g, _ in pairs], [p for _, p in pairs]
    a = evaluate(gold, pred, 3)
    b = evaluate([perm[g] for g in gold], [perm[p] for p in pred], 3)
    assert b.f1_snu == pytest.approx(a.f1_snu, abs=1e-15)
    assert b.accuracy == a.accuracy


@pytest.mark.parametrize("gold, pred, C", [([0, 1], [0], 2), ([], [], 2), ([0, 2], [0, 1], 2), ([0], [-1], 2)])
def test_errors(gold, pred, C):
    with pytest.raises(ValueError):
        evaluate(gold, pred, C)


def test_metrics_json_schema():
    d = evaluate([0, 1, 1], [0, 1, 0], 2, ["For", "Against"]).to_dict()
    assert {"confusion", "per_class", "macro_p", "macro_r", "f1_snu", "accuracy", "n"} <= set(d)
    assert set(d["per_class"]) == {"For", "Against"}
    assert d["confusion"] == [[1, 0], [1, 1]]


class TestAggregate:
    def test_mean_of_folds(self):
        out = aggregate_cv([{"accuracy": 0.8, "f1_snu": 0.5}, {"accuracy": 0.9, "f1_snu": 0.7}])
        assert out["accuracy"] == pytest.approx(0.85) and out["f1_snu"] == pytest.approx(0.6)

    def test_single_fold(self):
        r = evaluate([0, 1, 1], [0, 1, 0], 2)
        out = aggregate_cv([r])
        assert out["accuracy"] == r.accuracy and out["f1_snu"] == r.f1_snu and out["n_folds"] == 1

    def test_per_topic_then_overall(self):
        rng = np.random.default_rng(0)
        table = {f"topic{t}": [{"accuracy": float(a), "f1_snu": 0.0} for a in rng.random(5)] for t in range(4)}
        out = aggregate_cv(table)
        means = [np.mean([f["accuracy"] for f in folds]) for folds in table.values()]
        for (name, folds), m in zip(table.items(), means):
            assert out["topics"][name]["accuracy"] == pytest.approx(m, abs=1e-15)
        assert out["AVG"]["accuracy"] == pytest.approx(np.mean(means), abs=1e-15)

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate_cv([])
