"""Deterministic edge randomness and slab-restricted cluster exploration.

An edge is open at parameter ``p`` iff ``edge_uniform(seed, replica, e) < p``.
Because the uniform does not depend on ``p``, explorations at different
parameters with the same ``(seed, replica)`` are coupled monotonically.

Two explorers share these semantics:

* :func:`explore_slab` is a plain-Python BFS over :class:`~percolab.graph.SiteId`
  objects.  It is slow but returns the visited sites themselves.
* :func:`explore_batch` runs many replicas through the compiled kernel and
  returns per-replica count arrays.  Tests check the two agree exactly.
"""
from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernel as K
from . import hashing as hs
from .graph import (EdgeKey, Family, MalformedInputError, SiteId, SlabWindow,
                    height_between, neighbors, origin, tree_fp, fiber_key)

DEFAULT_BUDGET = 10**6
DEFAULT_HEIGHT_CAP = 64

_FAM_CODE = {Family.TREE: K.FAM_TREE, Family.TXZ: K.FAM_TXZ, Family.LL: K.FAM_LL}


@dataclass(frozen=True)
class SampleCtx:
    seed: int
    replica: int
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise MalformedInputError(f"p must lie in [0, 1], got {self.p}")


@dataclass
class ClusterView:
    visited: set
    per_level_counts: dict
    per_level_tree_counts: dict
    fiber_hits: dict
    exact_hits: set = field(default_factory=set)
    censored: bool = False
    edges_examined: int = 0


def edge_uniform(seed, replica, e):
    """Uniform in [0, 1) attached to edge ``e`` in sample ``(seed, replica)``."""
    ea, eb = e.fingerprint()
    return hs.uniform_from_keys(ea, eb, hs.seed_key(seed), hs.replica_key(replica))


def _as_window(w):
    if isinstance(w, SlabWindow):
        return w
    return SlabWindow(int(w[0]), int(w[1]))


def explore_slab(ctx, g, base, w, budget=DEFAULT_BUDGET, targets=(), first_visit_stop=False,
                 fiber_window=None):
    """BFS from ``base`` over open edges, never leaving heights ``w`` relative to ``base``.

    With ``first_visit_stop`` the sites at the bottom height ``w.lo`` are
    recorded but never expanded.  ``fiber_window`` truncates the Z^d coordinate
    to ``[-fiber_window, fiber_window]`` (T x Z^d only).
    """
    w = _as_window(w)
    if budget < 1:
        raise MalformedInputError("budget must be >= 1")
    if not w.lo <= 0 <= w.hi:
        raise MalformedInputError(f"base height 0 outside window [{w.lo}, {w.hi}]")
    skey = hs.seed_key(ctx.seed)
    rkey = hs.replica_key(ctx.replica)
    targets = list(targets)
    target_set = set(targets)

    visited = {base: None}
    queue = [base]
    levels = Counter({0: 1})
    tree_seen = {base.tree}
    tree_levels = Counter({0: 1})
    hits = {t: 0 for t in targets}
    exact = set()
    if base.tree in target_set:
        hits[base.tree] += 1
        exact.add(base.tree)
    edges = 0
    censored = False
    head = 0
    while head < len(queue) and not censored:
        v = queue[head]
        head += 1
        rel = height_between(base, v)
        if first_visit_stop and rel == w.lo:
            continue
        for nbr, kind in neighbors(g, v):
            nrel = height_between(base, nbr)
            if nrel not in w:
                continue
            if fiber_window is not None and g.family is Family.TXZ:
                if any(abs(c) > fiber_window for c in nbr.fiber):
                    continue
            if nbr in visited:
                continue
            edges += 1
            e = EdgeKey.of(g, v, nbr, kind)
            ea, eb = e.fingerprint()
            if hs.uniform_from_keys(ea, eb, skey, rkey) >= ctx.p:
                continue
            if len(visited) >= budget:
                censored = True
                break
            visited[nbr] = None
            queue.append(nbr)
            levels[nrel] += 1
            if nbr.tree not in tree_seen:
                tree_seen.add(nbr.tree)
                tree_levels[nrel] += 1
            if nbr.tree in target_set:
                hits[nbr.tree] += 1
                if nbr.fiber == base.fiber:
                    exact.add(nbr.tree)
    return ClusterView(set(visited), dict(levels), dict(tree_levels), hits, exact, censored, edges)


@dataclass
class BatchResult:
    """Per-replica outcomes of a batch of explorations.

    ``levels[r, h - lo]`` counts visited sites at relative height ``h``;
    ``tree_levels`` counts distinct tree vertices instead.  ``hits[r, j]`` is
    the number of visited sites in the fiber of target ``j`` and ``exact[r, j]``
    flags the target site carrying the base's own fiber coordinate.
    """
    lo: int
    hi: int
    levels: np.ndarray
    tree_levels: np.ndarray
    hits: np.ndarray
    exact: np.ndarray
    n_visited: np.ndarray
    edges: np.ndarray
    censored: np.ndarray

    @property
    def samples(self):
        return self.levels.shape[0]

    @property
    def censor_rate(self):
        return float(self.censored.mean()) if self.samples else 0.0

    def level(self, h):
        return self.levels[:, h - self.lo]

    def tree_level(self, h):
        return self.tree_levels[:, h - self.lo]


def _signed64(x):
    return x - (1 << 64) if x >= (1 << 63) else x


def encode_base(g, base):
    word = np.asarray(base.tree.word, dtype=np.int64)
    if g.family is Family.TXZ:
        a = base.fiber[0]
        b = base.fiber[1] if g.d > 1 else 0
    elif g.family is Family.LL:
        za, zb = fiber_key(g, base.fiber)
        a, b = _signed64(za), _signed64(zb)
    else:
        a = b = 0
    return base.tree.up, word, np.int64(a), np.int64(b)


def encode_targets(targets):
    fps = [tree_fp(t) for t in targets]
    order = sorted(range(len(fps)), key=lambda i: fps[i])
    tfa = np.array([fps[i][0] for i in order], dtype=np.uint64)
    tfb = np.array([fps[i][1] for i in order], dtype=np.uint64)
    return tfa, tfb, np.array(order, dtype=np.int64)


def default_workers():
    return os.cpu_count() or 1


def explore_batch(g, p, window, samples, seed, replica0=0, base=None, targets=(),
                  first_visit_stop=False, budget=DEFAULT_BUDGET, fiber_window=None, workers=None):
    """Explore replicas ``replica0 .. replica0 + samples - 1`` with the compiled kernel.

    Results depend only on the arguments, never on ``workers``.
    """
    w = _as_window(window)
    if budget < 1:
        raise MalformedInputError("budget must be >= 1")
    if not w.lo <= 0 <= w.hi:
        raise MalformedInputError(f"base height 0 outside window [{w.lo}, {w.hi}]")
    if samples < 0:
        raise MalformedInputError("samples must be >= 0")
    base = origin(g) if base is None else base
    base_up, word, a, b = encode_base(g, base)
    tfa, tfb, torder = encode_targets(list(targets))
    width = w.hi - w.lo + 1
    nt = len(targets)
    levels = np.zeros((samples, width), np.int32)
    tree_levels = np.zeros((samples, width), np.int32)
    hits = np.zeros((samples, nt), np.int64)
    exact = np.zeros((samples, nt), np.int8)
    stats = np.zeros((samples, 3), np.int64)
    fwin = -1 if fiber_window is None else int(fiber_window)
    init_cap = int(min(budget, 256))
    args = (_FAM_CODE[g.family], g.k, g.d, float(p), np.uint64(hs.seed_key(seed)), np.int64(replica0))
    tail = (base_up, word, a, b, w.lo, w.hi, int(budget), bool(first_visit_stop), fwin,
            tfa, tfb, torder, init_cap, levels, tree_levels, hits, exact, stats)
    workers = default_workers() if workers is None else max(1, int(workers))
    if samples:
        if workers == 1:
            K.run_range(*args, 0, samples, *tail)
        else:
            numba.set_num_threads(min(workers, numba.config.NUMBA_NUM_THREADS))
            nchunks = min(samples, 8 * workers)
            bounds = np.linspace(0, samples, nchunks + 1).astype(np.int64)
            K.run_chunks(*args, bounds, *tail)
    return BatchResult(w.lo, w.hi, levels, tree_levels, hits, exact,
                       stats[:, K.N_VISITED], stats[:, K.EDGES], stats[:, K.CENSORED].astype(bool))


def explore_single(ctx, g, base, window, budget=DEFAULT_BUDGET, targets=(), first_visit_stop=False,
                   fiber_window=None):
    """One compiled exploration; also returns the visited sites in kernel encoding.

    The extra return value is a dict with arrays ``rel_height``, ``a``, ``b``
    (fiber encoding) and ``digits`` (descent digits relative to the base,
    for sites at or below the base height inside its descendant subtree;
    ``None`` otherwise).
    """
    w = _as_window(window)
    base_up, word, a, b = encode_base(g, base)
    targets = list(targets)
    tfa, tfb, torder = encode_targets(targets)
    width = w.hi - w.lo + 1
    levels = np.zeros(width, np.int32)
    tree_levels = np.zeros(width, np.int32)
    hits = np.zeros(len(targets), np.int64)
    exact = np.zeros(len(targets), np.int8)
    stats = np.zeros(3, np.int64)
    fwin = -1 if fiber_window is None else int(fiber_window)
    ws = K.run_single(_FAM_CODE[g.family], g.k, g.d, float(ctx.p), np.uint64(hs.seed_key(ctx.seed)),
                      np.int64(ctx.replica), base_up, word, a, b, w.lo, w.hi, int(budget),
                      bool(first_visit_stop), fwin, tfa, tfb, torder, int(min(budget, 256)),
                      levels, tree_levels, hits, exact, stats)
    n = int(stats[K.N_VISITED])
    q_t, q_a, q_b = ws[4][:n].copy(), ws[5][:n].copy(), ws[6][:n].copy()
    t_up, t_depth, t_parent, t_digit = ws[9], ws[10], ws[11], ws[12]
    base_t = len(word)
    bh = base_up - len(word)
    rel = t_up[q_t] - t_depth[q_t] - bh
    sites = {"rel_height": rel, "a": q_a, "b": q_b, "tree_index": q_t,
             "t_up": t_up, "t_depth": t_depth, "t_parent": t_parent, "t_digit": t_digit,
             "base_tree_index": base_t}
    view = {
        "per_level_counts": {w.lo + i: int(c) for i, c in enumerate(levels) if c},
        "per_level_tree_counts": {w.lo + i: int(c) for i, c in enumerate(tree_levels) if c},
        "fiber_hits": {t: int(hits[j]) for j, t in enumerate(targets)},
        "exact_hits": {t for j, t in enumerate(targets) if exact[j]},
        "censored": bool(stats[K.CENSORED]),
        "edges_examined": int(stats[K.EDGES]),
        "n_visited": n,
    }
    return view, sites


def descent_digits(sites, i):
    """Descent digits from the base to visited site ``i`` (must lie in the base's descendant subtree)."""
    t_parent, t_digit, t_depth = sites["t_parent"], sites["t_digit"], sites["t_depth"]
    base_t = sites["base_tree_index"]
    ti = int(sites["tree_index"][i])
    digits = []
    while ti != base_t:
        if t_depth[ti] == 0 and t_parent[ti] < 0:
            return None
        digits.append(int(t_digit[ti]))
        ti = int(t_parent[ti])
    return digits[::-1]


def explore_fiber_intersection(ctx, g, base=None, budget=DEFAULT_BUDGET, height_cap=DEFAULT_HEIGHT_CAP):
    """Number of sites of ``K_base`` in the fiber of ``base`` (heights capped at +-height_cap).

    Returns ``(count, censored)``.
    """
    base = origin(g) if base is None else base
    res = explore_batch(g, ctx.p, (-height_cap, height_cap), 1, ctx.seed, replica0=ctx.replica,
                        base=base, targets=[base.tree], budget=budget, workers=1)
    return int(res.hits[0, 0]), bool(res.censored[0])
