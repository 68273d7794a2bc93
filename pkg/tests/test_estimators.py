import io
import json
import math

import numpy as np
import pytest

from percolab import oracle
from percolab.estimators import (RunOpts, estimate_beta_star, estimate_chi, estimate_D_U, estimate_E,
                                 estimate_fiber_count, estimate_fiber_tail, estimate_H, estimate_P,
                                 estimate_point_to_fiber, estimate_Q, estimate_X, fit_log_linear,
                                 point_to_fiber_curve, raw_outcome)
from percolab.graph import GraphSpec, MalformedInputError
from percolab.records import CSV_COLUMNS, EstimateRecord, SeriesRecord, to_csv, to_json

TREE3 = GraphSpec("tree", 3)
TXZ1 = GraphSpec("txz", 3, 1)
LL3 = GraphSpec("ll", 3)
ALL = [TREE3, TXZ1, GraphSpec("txz", 3, 2), LL3]


def test_P_examples():
    for g in ALL:
        assert estimate_P(g, 0.4, 0, 100).value == 1
        assert estimate_P(g, 1.0, 2, 50, budget=10**5).value == 1
    r = estimate_P(TREE3, 0.5, 2, 10**5)
    assert r.within(0.25)
    assert r.stderr > 0 and r.n_samples == 10**5


def test_E_examples():
    a = estimate_E(TREE3, 0.6, 3, 5000, seed=2)
    b = estimate_P(TREE3, 0.6, 3, 5000, seed=2)
    assert a.value == b.value
    assert estimate_E(TXZ1, 0.0, 0, 10).value == 1
    P = estimate_P(TXZ1, 0.2, 1, 40000, seed=5)
    E = estimate_E(TXZ1, 0.2, 1, 40000, seed=5)
    assert E.value >= P.value


def test_Q_examples():
    assert estimate_Q(TREE3, 0.7, 1, 20000).within(0.7)
    assert estimate_Q(TXZ1, 0.0, 2, 100).value == 0
    for g in ALL:
        Q = estimate_Q(g, 0.2, 2, 5000, seed=1)
        P = estimate_P(g, 0.2, 2, 5000, seed=1)
        assert Q.value <= P.value
    with pytest.raises(MalformedInputError):
        estimate_Q(TREE3, 0.5, 0, 10)


def test_X_examples_and_mtp_on_tree():
    for g in ALL:
        assert estimate_X(g, 0.0, 0, 0, 0, 10).value == 1
    down = estimate_X(TREE3, 0.5, -1, -1, 0, 20000)
    up = estimate_X(TREE3, 0.5, 1, 0, 1, 20000)
    assert down.within(1.0) and up.within(0.5)
    with pytest.raises(MalformedInputError):
        estimate_X(TREE3, 0.5, 2, 0, 1, 10)


def test_chi_examples():
    for lam in (0.0, 0.5, 1.3):
        assert estimate_chi(TXZ1, 0.0, lam, 4, 10).value == 1
    L = 16
    r = estimate_chi(TREE3, 0.3, 0.5, L, 40000, seed=3)
    assert r.within(oracle.tree_chi_tilted(0.3, 3, 0.5, L))
    a = estimate_chi(TREE3, 0.3, 0.2, L, 40000, seed=3)
    b = estimate_chi(TREE3, 0.3, 0.8, L, 40000, seed=3)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)
    assert "lower bound" in r.params["truncation"]


def test_H_tree():
    r = estimate_H(TREE3, 0.3, 0.5, 12, 40000, seed=4)
    assert r.within(oracle.tree_H(0.3, 3, 0.5, 12))


def test_D_U_examples():
    D, U, Ud = estimate_D_U(TREE3, 0.5, 2, 40000)
    assert D.within(1.0)
    assert math.isclose(U.value, D.value / 4)
    D0, U0, _ = estimate_D_U(TXZ1, 0.0, 0, 10)
    assert D0.value == U0.value == 1
    D, _, _ = estimate_D_U(TXZ1, 0.25, 2, 20000, seed=8)
    E = estimate_E(TXZ1, 0.25, 2, 20000, seed=9)
    assert abs(D.value - 4 * E.value) <= 3 * math.hypot(D.stderr, 4 * E.stderr)


def test_point_to_fiber_examples():
    assert estimate_point_to_fiber(TXZ1, 0.3, 0, 10, height_cap=4).value == 1
    assert estimate_point_to_fiber(TXZ1, 0.0, 4, 10, height_cap=4).value == 0
    # downward supercritical on the tree: keep the height cap small
    r = estimate_point_to_fiber(TREE3, 0.6, 4, 20000, height_cap=2)
    assert r.within(0.6 ** 4)
    ms, M, cens = point_to_fiber_curve(TREE3, 0.6, 6, 20000, height_cap=3)
    assert ms == [0, 2, 4, 6]
    for i, m in enumerate(ms):
        se = math.sqrt(0.6 ** m * (1 - 0.6 ** m) / 20000) + 1e-12
        assert abs(M[:, i].mean() - 0.6 ** m) <= 3 * se


def test_fiber_tail_examples():
    t = estimate_fiber_tail(TREE3, 0.7, 2000, height_cap=4)
    assert list(t.tail) == [1.0]
    t0 = estimate_fiber_tail(LL3, 0.0, 500)
    assert t0.tail[0] == 1 and len(t0.tail) == 1
    t = estimate_fiber_tail(LL3, 0.2, 40000, seed=1)
    assert t.rate > 0 and t.t_stat > 3
    with pytest.raises(MalformedInputError):
        estimate_fiber_tail(LL3, 1.0, 10)


def test_fiber_count_tree_singleton():
    assert estimate_fiber_count(TREE3, 0.6, 300, height_cap=5).value == 1


def test_beta_star_tree():
    s = estimate_beta_star(TREE3, 0.8, 8, 40000)
    exact = -math.log(0.8) / math.log(2)
    assert abs(s.summary["slope"] - exact) <= 3 * s.summary["slope_stderr"]
    assert s.summary["fekete_upper_bound"] >= exact - 0.02
    s1 = estimate_beta_star(TREE3, 1.0, 4, 10)
    assert s1.summary["slope"] == 0
    s0 = estimate_beta_star(TXZ1, 0.05, 6, 200)
    assert s0.summary["excluded"]


def test_fit_log_linear_exact_line():
    x = np.arange(1, 6, dtype=float)
    M = np.tile(np.exp(-0.7 * x), (10, 1))
    slope, se = fit_log_linear(x, M, negate=True)
    assert abs(slope - 0.7) < 1e-12 and se < 1e-9


def test_markov_P_le_E_all_families():
    for g in ALL:
        P = estimate_P(g, 0.2, 2, 5000, seed=6)
        E = estimate_E(g, 0.2, 2, 5000, seed=6)
        assert P.value <= E.value + 3 * (P.stderr + E.stderr)


def test_raw_outcome_monotone_in_p():
    grid = [0.1, 0.2, 0.3, 0.4]
    for g in (TXZ1, LL3):
        prev = None
        for p in grid:
            vals, _, _ = raw_outcome("E", g, p, 2000, RunOpts(seed=3), n=2)
            if prev is not None:
                assert (vals >= prev).all()
            prev = vals


def test_invalid_arguments():
    with pytest.raises(MalformedInputError):
        estimate_P(TREE3, 1.5, 2, 10)
    with pytest.raises(MalformedInputError):
        estimate_P(TREE3, 0.5, 2, 0)
    with pytest.raises(MalformedInputError):
        raw_outcome("nonsense", TREE3, 0.5, 10)


def test_records_serialisation():
    r = estimate_P(TXZ1, 0.3, 2, 100, seed=7)
    text = to_csv([r])
    head, row = text.strip().split("\n")
    assert head.split(",") == CSV_COLUMNS
    assert row.split(",")[0] == "P"
    obj = json.loads(to_json([r]))
    assert obj[0]["seed"] == 7 and obj[0]["window_lo"] == -2
    buf = io.StringIO()
    to_csv([r, r], buf)
    assert buf.getvalue().count("\n") == 3
    with pytest.raises(ValueError):
        EstimateRecord("P", {}, 0.5, -1.0, 10)
    with pytest.raises(ValueError):
        EstimateRecord("P", {}, 0.5, 0.1, 10, censor_rate=1.5)
    with pytest.raises(ValueError):
        SeriesRecord("P", [2, 1], [r, r])
