import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from percolab import oracle
from percolab.graph import GraphSpec
from percolab.oracle import (Instance, InstanceTooLarge, brute_force_connectivity, exact_connectivity,
                             exact_connectivity_small, fiber_tree_connectivity, truncated_slab_instance)

TXZ1 = GraphSpec("txz", 3, 1)


def test_tree_closed_form_examples():
    assert oracle.tree_path_probability(0.5, 2) == 0.25
    assert oracle.tree_path_probability(0.3, 0) == 1
    assert oracle.tree_path_probability(1, 7) == 1
    assert oracle.tree_reach_level(0.5, 3, 1) == 0.75
    assert oracle.tree_reach_level(0.5, 3, 2) == 0.609375
    assert oracle.tree_reach_level(1, 4, 5) == 1
    assert oracle.tree_reach_level(Fraction(1, 2), 3, 2) == Fraction(39, 64)


def test_tree_chi():
    assert oracle.tree_chi_tilted(0.0, 3, 0.5, 10) == 1
    for lam in (0.2, 0.5, 0.9):
        assert math.isclose(oracle.tree_chi_tilted(0.3, 3, lam, 30), oracle.tree_chi_tilted(0.3, 3, 1 - lam, 30),
                            rel_tol=1e-12)
    a, b = oracle.tree_chi_tilted(0.3, 3, 0.5, 30), oracle.tree_chi_tilted(0.3, 3, 0.5, 60)
    assert abs(a - b) < 1e-6
    assert math.isclose(b, oracle.tree_chi_closed(0.3, 3, 0.5), rel_tol=1e-9)
    caps = [oracle.tree_chi_tilted(0.4, 4, 0.3, c) for c in range(1, 12)]
    assert all(x < y for x, y in zip(caps, caps[1:]))
    assert oracle.tree_chi_closed(0.8, 3, 0.5) == math.inf


def test_tree_consistency_identity():
    for k in (3, 4, 6):
        for p in (0.55, 0.7, 0.9):
            if p * (k - 1) <= 1:
                continue
            for n in (1, 5, 20):
                lhs = 1 - (-math.log(oracle.tree_path_probability(p, n)) / (n * math.log(k - 1)))
                assert abs(lhs - oracle.tree_hawkes_dimension(p, k)) < 1e-12


def test_tiny_instances():
    single = Instance([("a", "b")], "a", frozenset(["b"]))
    assert exact_connectivity_small(single, 0.3) == 0.3
    par = Instance([("a", "b"), ("a", "b")], "a", frozenset(["b"]))
    assert math.isclose(exact_connectivity_small(par, 0.3), 2 * 0.3 - 0.09)
    ser = Instance([("a", "m"), ("m", "b")], "a", frozenset(["b"]))
    assert exact_connectivity_small(ser, Fraction(1, 3)) == Fraction(1, 9)


def test_size_refusal():
    big = Instance([(i, i + 1) for i in range(31)], 0, frozenset([31]))
    with pytest.raises(InstanceTooLarge):
        exact_connectivity_small(big, 0.5)
    assert exact_connectivity(big, Fraction(1, 2)) == Fraction(1, 2 ** 31)


@st.composite
def random_instances(draw):
    nv = draw(st.integers(2, 7))
    ne = draw(st.integers(1, 12))
    edges = [tuple(draw(st.lists(st.integers(0, nv - 1), min_size=2, max_size=2, unique=True)))
             for _ in range(ne)]
    nt = draw(st.integers(1, 3))
    targets = frozenset(draw(st.lists(st.integers(1, nv - 1), min_size=nt, max_size=nt)))
    return Instance(edges, 0, targets)


@settings(max_examples=150, deadline=None)
@given(random_instances(), st.fractions(0, 1, max_denominator=7))
def test_deletion_contraction_equals_enumeration(inst, p):
    assert exact_connectivity(inst, p) == brute_force_connectivity(inst, p)


def test_text_roundtrip():
    inst = truncated_slab_instance(TXZ1, 1, 1)
    back = Instance.from_text(inst.to_text())
    assert back.n_edges == inst.n_edges
    assert exact_connectivity(back, Fraction(1, 5)) == exact_connectivity(inst, Fraction(1, 5))
    text = "# comment\nsource s\ntargets t\ns a\na t  # trailing\ns t\n"
    assert exact_connectivity(Instance.from_text(text), Fraction(1, 2)) == Fraction(5, 8)
    with pytest.raises(Exception):
        Instance.from_text("s a\n")


def test_slab_instance_examples():
    tree = GraphSpec("tree", 3)
    assert exact_connectivity_small(truncated_slab_instance(tree, 2), 0.4) == pytest.approx(0.16)
    w0 = truncated_slab_instance(TXZ1, 1, 0)
    assert w0.n_edges == 1
    assert exact_connectivity_small(w0, 0.2) == pytest.approx(0.2)
    v1 = exact_connectivity_small(truncated_slab_instance(TXZ1, 1, 1), Fraction(1, 5))
    assert Fraction(1, 5) < v1 < Fraction(28, 100)
    ll = truncated_slab_instance(GraphSpec("ll", 3), 1)
    assert ll.n_edges <= 30


def test_truncation_monotone_in_window():
    p = Fraction(1, 4)
    for n, w_max in ((1, 2), (2, 1)):
        vals = [fiber_tree_connectivity(TXZ1, n, w, p) for w in range(w_max + 1)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        assert vals[0] == p ** n


def test_transfer_agrees_with_generic_solver():
    p = Fraction(1, 5)
    cases = [(TXZ1, 1, 1, "fiber", False), (TXZ1, 1, 2, "site", False), (TXZ1, 2, 1, "fiber", False),
             (TXZ1, 2, 1, "site", True), (GraphSpec("txz", 4, 1), 1, 1, "fiber", False),
             (TXZ1, 2, 1, "site", False)]
    for g, n, w, target, fv in cases:
        inst = truncated_slab_instance(g, n, w, target=target, first_visit=fv, max_edges=None)
        assert fiber_tree_connectivity(g, n, w, p, target, fv) == exact_connectivity(inst, p)


def test_exact_supermultiplicativity_values():
    p = Fraction(1, 5)
    P = [fiber_tree_connectivity(TXZ1, n, 1, p) for n in range(6)]
    assert P[0] == 1
    assert abs(float(P[1]) - 0.2647319552) < 1e-10
    for n in (1, 2):
        for m in (1, 2):
            assert P[n + m + 1] >= p * P[n] * P[m]


def test_expected_hits():
    inst = truncated_slab_instance(GraphSpec("tree", 3), 1)
    assert oracle.exact_expected_hits(inst, Fraction(1, 3)) == Fraction(1, 3)
