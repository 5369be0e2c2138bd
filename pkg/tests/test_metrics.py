import numpy as np
import pytest

from noisyre.data import Bag, Instance
from noisyre.metrics import (PredictionRecord, average_precision, pr_curve, precision_at_n, rank_predictions,
                             summary, write_pr_csv, write_summary)
from oracles import brute_metrics, random_ranking_case

LABELS = ("NA", "a", "b")


def rec(h, r="a", s=0.5):
    return PredictionRecord(h, "t", r, s)


def bag(h):
    return Bag(h, "t", None, (Instance(("x", "y"), (0, 1), (1, 2), h, "t", "NA"),))


def test_record_invariants():
    with pytest.raises(ValueError):
        rec("h", "NA")
    with pytest.raises(ValueError):
        rec("h", s=float("nan"))


def test_rank_one_bag():
    out = rank_predictions([bag("h")], [np.array([0.2, 0.3, 0.5])], LABELS)
    assert [(r.relation, r.score) for r in out] == [("b", 0.5), ("a", 0.3)]


def test_rank_ties_lexicographic():
    out = rank_predictions([bag("z"), bag("m")], [np.array([0.0, 0.5, 0.5])] * 2, LABELS)
    assert [(r.head_id, r.relation) for r in out] == [("m", "a"), ("m", "b"), ("z", "a"), ("z", "b")]


def test_rank_empty():
    assert rank_predictions([], [], LABELS) == []


def test_pr_examples():
    gold = {("a", "t", "a"), ("b", "t", "a"), ("c", "t", "a")}
    assert pr_curve([rec("a"), rec("b"), rec("c")], gold)[-1][:2] == (1.0, 1.0)
    rows = pr_curve([rec("x"), rec("a")], {("a", "t", "a")})
    assert [r[:2] for r in rows] == [(0.0, 0.0), (1.0, 0.5)]
    assert pr_curve([], gold) == []
    with pytest.raises(ValueError):
        pr_curve([rec("a")], set())


def test_precision_at_n_examples():
    gold = {("a", "t", "a"), ("b", "t", "a"), ("c", "t", "a")}
    ranking = [rec("a"), rec("x"), rec("b"), rec("c"), rec("y")]
    assert precision_at_n(ranking, gold, 4) == 0.75
    assert precision_at_n(ranking, gold, 100) == 3 / 5
    assert precision_at_n(ranking[2:4], gold, 2) == 1.0
    with pytest.raises(ValueError):
        precision_at_n([], gold, 1)
    with pytest.raises(ValueError):
        precision_at_n(ranking, gold, 0)


def test_average_precision_examples():
    gold = {("a", "t", "a"), ("b", "t", "a")}
    assert average_precision([rec("a"), rec("b")], gold) == 1.0
    assert average_precision([rec("a"), rec("x"), rec("b")], gold) == pytest.approx(0.8333, abs=1e-4)
    assert average_precision([rec("a"), rec("x"), rec("b")], gold) == (1 + 2 / 3) / 2
    assert average_precision([rec("x")], gold) == 0.0


def test_metrics_match_brute_force_exactly():
    rng = np.random.default_rng(0)
    for _ in range(200):
        ranking, gold = random_ranking_case(rng)
        rows, p_at, ap = brute_metrics(ranking, gold)
        assert pr_curve(ranking, gold) == rows
        assert average_precision(ranking, gold) == ap
        if ranking:
            for n in (1, 5, 100, 200, 300, len(ranking)):
                assert precision_at_n(ranking, gold, n) == p_at(n)


def test_curve_properties():
    rng = np.random.default_rng(1)
    for _ in range(100):
        ranking, gold = random_ranking_case(rng)
        rows = pr_curve(ranking, gold)
        recalls = [r[0] for r in rows]
        assert recalls == sorted(recalls)
        for t, (_, p, _) in enumerate(rows, 1):
            assert abs(p * t - round(p * t)) < 1e-9
        if ranking:
            assert precision_at_n(ranking, gold, len(ranking)) == rows[-1][1]


def test_input_order_is_canonicalized():
    rng = np.random.default_rng(2)
    bags = [bag(f"h{i}") for i in range(20)]
    dists = [rng.dirichlet(np.ones(3)) for _ in bags]
    perm = rng.permutation(20)
    a = rank_predictions(bags, dists, LABELS)
    b = rank_predictions([bags[i] for i in perm], [dists[i] for i in perm], LABELS)
    assert a == b


def test_outputs(tmp_path):
    gold = {("a", "t", "a")}
    ranking = [rec("a", s=0.9), rec("x", s=0.1)]
    write_pr_csv(pr_curve(ranking, gold), tmp_path / "pr.csv")
    assert (tmp_path / "pr.csv").read_text() == "recall,precision,score\n1.0,1.0,0.9\n1.0,0.5,0.1\n"
    s = summary(ranking, gold)
    assert s == {"p_at": {"100": 0.5, "200": 0.5, "300": 0.5}, "average_precision": 1.0}
    write_summary(s, tmp_path / "m.json")
    assert '"100": 0.5' in (tmp_path / "m.json").read_text()
