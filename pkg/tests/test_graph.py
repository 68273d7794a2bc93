import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from percolab.graph import (EdgeKey, EdgeKind, Family, GraphSpec, MalformedInputError, ORIGIN, SiteId,
                            SlabWindow, TreeVertex, descendant_fiber_representative, height_between,
                            modular, neighbors, origin, same_height_target)

SPECS = [GraphSpec("tree", 3), GraphSpec("tree", 4), GraphSpec("txz", 3, 1), GraphSpec("txz", 3, 2),
         GraphSpec("txz", 5, 1), GraphSpec("ll", 3), GraphSpec("ll", 4)]


@st.composite
def tree_vertices(draw, k):
    up = draw(st.integers(0, 5))
    n = draw(st.integers(0, 5))
    word = []
    for i in range(n):
        top = k - 3 if (i == 0 and up >= 1) else k - 2
        word.append(draw(st.integers(0, top)))
    return TreeVertex(up, tuple(word))


@st.composite
def sites(draw):
    g = draw(st.sampled_from(SPECS))
    t = draw(tree_vertices(g.k))
    if g.family is Family.TXZ:
        fib = tuple(draw(st.integers(-5, 5)) for _ in range(g.d))
    elif g.family is Family.LL:
        fib = tuple(sorted(set(draw(st.lists(tree_vertices(g.k), max_size=3)))))
    else:
        fib = ()
    return g, SiteId(t, fib)


def test_origin_degrees():
    tree = GraphSpec("tree", 3)
    nb = neighbors(tree, origin(tree))
    assert len(nb) == 3
    assert sorted(height_between(origin(tree), v) for v, _ in nb) == [-1, -1, 1]
    txz = GraphSpec("txz", 3, 1)
    kinds = [kd for _, kd in neighbors(txz, origin(txz))]
    assert kinds.count(EdgeKind.TREE) == 3 and kinds.count(EdgeKind.LATTICE) == 2
    ll = GraphSpec("ll", 3)
    nb = neighbors(ll, origin(ll))
    assert len(nb) == 4
    flip = [v for v, kd in nb if kd is EdgeKind.FLIP]
    assert flip == [SiteId(ORIGIN, (ORIGIN,))]


@settings(max_examples=300, deadline=None)
@given(sites())
def test_neighbor_symmetry(gs):
    g, v = gs
    nb = neighbors(g, v)
    assert len(nb) == g.degree
    assert len({u for u, _ in nb}) == g.degree
    for u, kind in nb:
        back = [(w, kd) for w, kd in neighbors(g, u) if w == v]
        assert back == [(v, kind)]


@settings(max_examples=300, deadline=None)
@given(sites())
def test_edge_key_from_either_end(gs):
    g, v = gs
    for u, kind in neighbors(g, v):
        a = EdgeKey.of(g, v, u, kind)
        b = EdgeKey.of(g, u, v, kind)
        assert a.to_bytes() == b.to_bytes()
        assert a.fingerprint() == b.fingerprint()


@settings(max_examples=100, deadline=None)
@given(sites())
def test_edge_keys_distinct_around_a_vertex(gs):
    g, v = gs
    keys = [EdgeKey.of(g, v, u, kd) for u, kd in neighbors(g, v)]
    assert len({k.to_bytes() for k in keys}) == len(keys)
    assert len({k.fingerprint() for k in keys}) == len(keys)


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 6).flatmap(lambda k: st.tuples(st.just(k), tree_vertices(k), tree_vertices(k),
                                                      tree_vertices(k))))
def test_height_telescoping_and_modular(args):
    k, a, b, c = args
    u, v, w = SiteId(a), SiteId(b), SiteId(c)
    assert height_between(u, w) == height_between(u, v) + height_between(v, w)
    assert height_between(u, v) == -height_between(v, u)
    g = GraphSpec("tree", k)
    assert modular(g, u, v) * modular(g, v, u) == 1


def test_height_examples():
    o = SiteId(ORIGIN)
    child = SiteId(ORIGIN.child(0, 3))
    cousin = SiteId(TreeVertex(1, (0,)))
    assert height_between(o, child) == -1
    assert height_between(o, cousin) == 0
    assert height_between(child, child) == 0
    g3, g4 = GraphSpec("tree", 3), GraphSpec("tree", 4)
    assert modular(g3, o, child) == Fraction(1, 2)
    assert modular(g3, child, child) == 1
    assert modular(g4, o, SiteId(TreeVertex(2, ()))) == 9


def test_parent_child_roundtrip():
    for k in (3, 4, 5):
        for t in (ORIGIN, TreeVertex(2, ()), TreeVertex(2, (0, 1)), TreeVertex(0, (1, 1))):
            kids = [t.child(d, k) for d in range(k - 1)]
            assert len(set(kids)) == k - 1
            assert all(c.parent() == t for c in kids)
            assert all(c.height == t.height - 1 for c in kids)
            for c in kids:
                c.validate(k)


def test_slab_reachability():
    """Tree vertices reachable inside heights [-n, 0] form the depth-n descendant subtree."""
    for k in (3, 4):
        g = GraphSpec("tree", k)
        for n in range(5):
            seen = {ORIGIN}
            stack = [ORIGIN]
            while stack:
                t = stack.pop()
                for s, _ in neighbors(g, SiteId(t)):
                    if -n <= s.tree.height <= 0 and s.tree not in seen:
                        seen.add(s.tree)
                        stack.append(s.tree)
            assert len(seen) == sum((k - 1) ** i for i in range(n + 1))
            reps = {descendant_fiber_representative(g, origin(g), i, j).tree
                    for i in range(n + 1) for j in range((k - 1) ** i)}
            assert seen == reps


def test_descendant_representatives():
    g = GraphSpec("txz", 3, 1)
    base = SiteId(TreeVertex(1, (0,)), (3,))
    assert descendant_fiber_representative(g, base, 0, 0) == base
    reps = [descendant_fiber_representative(g, origin(g), 2, i) for i in range(4)]
    assert len(set(reps)) == 4 and all(r.tree.height == -2 for r in reps)
    g4 = GraphSpec("tree", 4)
    assert len({descendant_fiber_representative(g4, origin(g4), 3, i) for i in range(27)}) == 27
    with pytest.raises(MalformedInputError):
        descendant_fiber_representative(g, origin(g), 2, 4)


def test_same_height_target():
    assert same_height_target(0) == ORIGIN
    assert same_height_target(4) == TreeVertex(2, (0, 0))
    with pytest.raises(MalformedInputError):
        same_height_target(3)


def test_malformed_inputs():
    with pytest.raises(MalformedInputError):
        GraphSpec("tree", 2)
    with pytest.raises(MalformedInputError):
        GraphSpec("txz", 3, 0)
    with pytest.raises(MalformedInputError):
        GraphSpec("txz", 3, 3)
    with pytest.raises(MalformedInputError):
        GraphSpec("banana", 3)
    with pytest.raises(MalformedInputError):
        neighbors(GraphSpec("tree", 3), SiteId(TreeVertex(0, (2,))))
    with pytest.raises(MalformedInputError):
        # first digit after an up-step may not retrace
        neighbors(GraphSpec("tree", 3), SiteId(TreeVertex(1, (1,))))
    with pytest.raises(MalformedInputError):
        SlabWindow(1, 2)
    with pytest.raises(MalformedInputError):
        SlabWindow(-1, -2)


def test_graphspec_json_roundtrip():
    for g in SPECS:
        assert GraphSpec.from_json(g.to_json()) == g
        assert set(json.loads(g.to_json())) == {"family", "k", "d"}
