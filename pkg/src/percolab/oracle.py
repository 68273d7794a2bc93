"""Exact values for validation.

Closed forms on the pure tree (connecting paths are unique there) and an
exact connectivity solver for small explicit graphs.

The solver is deletion-contraction run along a fixed edge order, memoised on
the partition that the contracted components induce on the *frontier*
(vertices with both processed and unprocessed incident edges).  Each block of
the partition carries two flags: contains the source, touches a target.  A
source block that drops off the frontier without meeting a target is a dead
end; a merge of a source block with a target block is a success.  Arithmetic
is generic, so passing ``Fraction`` probabilities gives exact rationals.

Instance text format (one edge per line, ``#`` comments allowed)::

    source o
    targets t1 t2
    o a
    a t1

Vertex names are arbitrary tokens without whitespace.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .graph import (Family, MalformedInputError, SiteId, TreeVertex, descendant_fiber_representative,
                    height_between, neighbors, origin)

MAX_SMALL_EDGES = 30


class InstanceTooLarge(MalformedInputError):
    pass


# ---------------------------------------------------------------- tree closed forms

def tree_path_probability(p, n):
    if n < 0:
        raise MalformedInputError("n must be >= 0")
    return p ** n


def tree_reach_level(p, k, n):
    """Probability that the tree cluster of o reaches depth n below o."""
    q = 1 if isinstance(p, Fraction) else 1.0
    for _ in range(n):
        q = 1 - (1 - p * q) ** (k - 1)
    return q


def _tree_count(k, u, m):
    if m == 0:
        return 1
    if u == 0:
        return (k - 1) ** m
    return (k - 2) * (k - 1) ** (m - 1)


def tree_chi_tilted(p, k, lam, height_cap):
    """Sum over tree vertices x with u up-steps and m down-steps, u + m <= cap,
    of p^(u+m) (k-1)^(lam (u-m))."""
    total = 0.0
    for s in range(height_cap + 1):
        for u in range(s + 1):
            m = s - u
            total += _tree_count(k, u, m) * p ** s * (k - 1) ** (lam * (u - m))
    return total


def tree_chi_closed(p, k, lam):
    """Untruncated tilted susceptibility on the tree (inf when it diverges)."""
    a = p * (k - 1) ** lam
    b = p * (k - 1) ** (1 - lam)
    if a >= 1 or b >= 1:
        return math.inf
    return (1 - a * b / (k - 1)) / ((1 - a) * (1 - b))


def tree_expected_level(p, k, l, lo, hi):
    """E X_l^{lo,hi} on the tree: paths go up u <= hi steps then down m = u - l steps."""
    if not lo <= min(0, l) or not max(0, l) <= hi:
        return 0 * p
    total = 0 * p
    for u in range(max(0, l), hi + 1):
        m = u - l
        if u - m < lo:
            continue
        total += _tree_count(k, u, m) * p ** (u + m)
    return total


def tree_D(p, k, n):
    return ((k - 1) * p) ** n


def tree_H(p, k, lam, cap):
    """Half-space generating function sum_{n=0}^{cap} (k-1)^(-lam n) E X_{-n}^{-cap,0}."""
    r = (k - 1) ** (1 - lam) * p
    return sum(r ** n for n in range(cap + 1))


def tree_hawkes_dimension(p, k):
    return math.log(p * (k - 1)) / math.log(k - 1)


# ---------------------------------------------------------------- explicit instances

@dataclass
class Instance:
    edges: list
    source: object
    targets: frozenset
    meta: dict = field(default_factory=dict)

    @property
    def n_edges(self):
        return len(self.edges)

    def vertices(self):
        out = {self.source}
        out.update(self.targets)
        for u, v in self.edges:
            out.add(u)
            out.add(v)
        return out

    def to_text(self):
        names = {}

        def nm(x):
            if x not in names:
                names[x] = f"v{len(names)}"
            return names[x]

        lines = [f"source {nm(self.source)}", "targets " + " ".join(nm(t) for t in sorted(self.targets, key=repr))]
        lines += [f"{nm(u)} {nm(v)}" for u, v in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        source, targets, edges = None, None, []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "source":
                if len(parts) != 2:
                    raise MalformedInputError(f"bad source line: {raw!r}")
                source = parts[1]
            elif parts[0] == "targets":
                targets = frozenset(parts[1:])
            elif len(parts) == 2:
                edges.append((parts[0], parts[1]))
            else:
                raise MalformedInputError(f"bad edge line: {raw!r}")
        if source is None or not targets:
            raise MalformedInputError("instance needs a source and at least one target")
        return cls(edges, source, targets)


def _canon(labels, flags):
    """Relabel blocks by first occurrence so equal partitions get equal keys."""
    remap = {}
    out = []
    for b in labels:
        if b not in remap:
            remap[b] = len(remap)
        out.append(remap[b])
    fl = [0] * len(remap)
    for b, f in flags.items():
        if b in remap:
            fl[remap[b]] |= f
    return tuple(out), tuple(fl)


_SRC = 1
_TGT = 2


def exact_connectivity(inst, p, max_edges=None):
    """P(source connected to some target), each edge open independently with prob ``p``."""
    if max_edges is not None and inst.n_edges > max_edges:
        raise InstanceTooLarge(f"instance has {inst.n_edges} edges, limit is {max_edges}")
    if inst.source in inst.targets:
        return 1 + 0 * p
    edges = [(u, v) for u, v in inst.edges if u != v]
    m = len(edges)
    last = {}
    first = {}
    for i, (u, v) in enumerate(edges):
        for x in (u, v):
            first.setdefault(x, i)
            last[x] = i
    if inst.source not in first:
        return 0 * p
    if not any(t in first for t in inst.targets):
        return 0 * p

    def base_flag(x):
        return (_SRC if x == inst.source else 0) | (_TGT if x in inst.targets else 0)

    # frontier before edge i: vertices with first < i <= last, in a fixed order
    frontiers = []
    for i in range(m + 1):
        frontiers.append(tuple(sorted((x for x in first if first[x] < i <= last[x]), key=lambda x: first[x])))

    one = 1 + 0 * p
    zero = 0 * p
    q = 1 - p
    memo = {}

    def solve(i, labels, flags):
        key = (i, labels, flags)
        hit = memo.get(key)
        if hit is not None:
            return hit
        fr = frontiers[i]
        u, v = edges[i]
        # materialise the partition with the edge endpoints possibly entering
        lab = dict(zip(fr, labels))
        fl = dict(enumerate(flags))
        nxt = max(labels, default=-1) + 1
        for x in (u, v):
            if x not in lab:
                lab[x] = nxt
                fl[nxt] = base_flag(x)
                nxt += 1
        res = zero
        for open_ in (True, False):
            lab2 = dict(lab)
            fl2 = dict(fl)
            if open_:
                bu, bv = lab2[u], lab2[v]
                if bu != bv:
                    merged = fl2[bu] | fl2[bv]
                    if merged & _SRC and merged & _TGT:
                        res += p * one
                        continue
                    for x in lab2:
                        if lab2[x] == bv:
                            lab2[x] = bu
                    fl2[bu] = merged
                    del fl2[bv]
            w = p if open_ else q
            res += w * _advance(i + 1, lab2, fl2)
        memo[key] = res
        return res

    def _advance(j, lab, fl):
        fr = frontiers[j]
        keep = set(fr)
        alive = {lab[x] for x in fr}
        # a source block that leaves the frontier can no longer reach a target
        for b, f in fl.items():
            if f & _SRC and b not in alive:
                return zero
        if j == m:
            return zero
        labels, flags = _canon([lab[x] for x in fr], {b: f for b, f in fl.items() if b in alive})
        # the source may not have entered yet: it is then implicitly alive
        return solve(j, labels, flags)

    return solve(0, (), ())


def exact_connectivity_small(inst, p):
    """Exact connectivity for instances with at most 30 edges."""
    return exact_connectivity(inst, p, max_edges=MAX_SMALL_EDGES)


def brute_force_connectivity(inst, p, max_edges=20):
    """Enumerate all 2^E configurations (independent check for tiny instances)."""
    if inst.n_edges > max_edges:
        raise InstanceTooLarge(f"{inst.n_edges} edges is too many to enumerate")
    if inst.source in inst.targets:
        return 1 + 0 * p
    total = 0 * p
    for mask in itertools.product((0, 1), repeat=inst.n_edges):
        adj = {}
        for bit, (u, v) in zip(mask, inst.edges):
            if bit:
                adj.setdefault(u, []).append(v)
                adj.setdefault(v, []).append(u)
        seen = {inst.source}
        stack = [inst.source]
        while stack:
            x = stack.pop()
            for y in adj.get(x, ()):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if seen & inst.targets:
            w = 1 + 0 * p
            for bit in mask:
                w *= p if bit else (1 - p)
            total += w
    return total


def exact_expected_hits(inst, p, max_edges=None):
    """Expected number of targets connected to the source (sum of single-target probabilities)."""
    return sum(exact_connectivity(Instance(inst.edges, inst.source, frozenset([t])), p, max_edges)
               for t in sorted(inst.targets, key=repr))


# ---------------------------------------------------------------- slab instances

def _in_window(g, v, fiber_window):
    if g.family is Family.TXZ and fiber_window is not None:
        return all(abs(c) <= fiber_window for c in v.fiber)
    return True


def _prune_pendants(edges, keep):
    """Drop dead-end edges (a degree-1 endpoint that is neither source nor target); exact."""
    edges = list(edges)
    while True:
        deg = {}
        for u, v in edges:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        dead = {x for x, c in deg.items() if c == 1 and x not in keep}
        if not dead:
            return edges
        edges = [(u, v) for u, v in edges if u not in dead and v not in dead]


def truncated_slab_instance(g, n, fiber_window=None, target="fiber", first_visit=False, index=0,
                            max_edges=MAX_SMALL_EDGES):
    """The depth-``n`` slab below the origin as an explicit edge list.

    T x Z^d fibers are cut to ``[-w, w]^d``; lamplighter slabs are finite as
    they stand (lamps can only be lit inside the slab's tree region).  The
    target is the fiber over descendant ``index`` (``target="fiber"``) or the
    single site carrying the origin's fiber coordinate (``target="site"``).
    With ``first_visit`` the edges inside the bottom level are dropped, which
    makes bottom sites dead ends exactly as in the first-visit exploration.

    Edges are emitted in a post-order over the tree so the exact solver's
    frontier stays narrow.  ``max_edges=None`` lifts the size limit.
    """
    if g.family is Family.TXZ and fiber_window is None:
        raise MalformedInputError("T x Z^d slabs need a fiber window")
    o = origin(g)
    sites = {o}
    stack = [o]
    while stack:
        x = stack.pop()
        for y, _ in neighbors(g, x):
            h = height_between(o, y)
            if -n <= h <= 0 and _in_window(g, y, fiber_window) and y not in sites:
                sites.add(y)
                stack.append(y)
    tx = descendant_fiber_representative(g, o, n, index)
    if target == "fiber":
        targets = frozenset(s for s in sites if s.tree == tx.tree)
    elif target == "site":
        targets = frozenset([tx]) if tx in sites else frozenset()
    else:
        raise MalformedInputError(f"unknown target kind {target!r}")

    # collect edges grouped by the tree vertex "owning" them, then order by tree post-order
    by_owner = {}
    seen = set()
    for x in sites:
        for y, kind in neighbors(g, x):
            if y not in sites:
                continue
            key = frozenset((x, y))
            if key in seen:
                continue
            seen.add(key)
            hx, hy = height_between(o, x), height_between(o, y)
            if first_visit and hx == -n and hy == -n:
                continue
            owner = x.tree if hx <= hy else y.tree
            by_owner.setdefault(owner, []).append(tuple(sorted((x, y))))

    order = []

    def post(t, depth):
        if depth < n:
            for dgt in range(g.k - 1):
                post(t.child(dgt, g.k), depth + 1)
        order.append(t)

    post(o.tree, 0)
    edges = []
    for t in order:
        # vertical edges (to the parent) last, so a finished subtree is merged right away
        es = sorted(by_owner.get(t, []), key=lambda e: (e[0].tree != e[1].tree, e))
        edges.extend(es)
    edges = _prune_pendants(edges, {o} | set(targets))
    inst = Instance(edges, o, targets, {"family": g.family.value, "k": g.k, "d": g.d, "n": n,
                                        "fiber_window": fiber_window, "target": target,
                                        "first_visit": first_visit})
    if max_edges is not None and inst.n_edges > max_edges:
        raise InstanceTooLarge(f"slab instance has {inst.n_edges} edges, limit is {max_edges}")
    return inst


# ---------------------------------------------------------------- fiber-tree transfer

def _merge(state, i, j):
    labels, flags = state
    a, b = labels[i], labels[j]
    if a == b:
        return state
    lo_, hi_ = min(a, b), max(a, b)
    fl = list(flags)
    fl[lo_] |= fl[hi_]
    new = [lo_ if x == hi_ else x for x in labels]
    del fl[hi_]
    new = [x - 1 if x > hi_ else x for x in new]
    return _canon_state(new, fl)


def _canon_state(labels, flags):
    remap = {}
    out = []
    for b in labels:
        if b not in remap:
            remap[b] = len(remap)
        out.append(remap[b])
    fl = [0] * len(remap)
    for b, f in enumerate(flags):
        if b in remap:
            fl[remap[b]] |= f
    return tuple(out), tuple(fl)


def _add_edges(dist, pairs, p):
    q = 1 - p
    for i, j in pairs:
        nxt = {}
        for st, w in dist.items():
            m = _merge(st, i, j)
            nxt[m] = nxt.get(m, 0) + w * p
            nxt[st] = nxt.get(st, 0) + w * q
        dist = nxt
    return dist


def fiber_tree_connectivity(g, n, fiber_window, p, target="fiber", first_visit=False, index=0):
    """Exact P(o connected to the target) in the depth-``n`` T x Z^d slab with fibers cut to [-w, w]^d.

    Transfer over the tree: each subtree is summarised by the distribution of
    the partition it induces on its root fiber, with a flag on blocks that
    reach the target.  Agrees with ``exact_connectivity`` on
    ``truncated_slab_instance`` but scales to deep slabs.
    """
    if g.family is not Family.TXZ:
        raise MalformedInputError("fiber-tree transfer is implemented for T x Z^d only")
    w = fiber_window
    pts = list(itertools.product(range(-w, w + 1), repeat=g.d))
    pos = {x: i for i, x in enumerate(pts)}
    nf = len(pts)
    horiz = []
    for x in pts:
        for ax in range(g.d):
            y = list(x)
            y[ax] += 1
            y = tuple(y)
            if y in pos:
                horiz.append((pos[x], pos[y]))
    zero_pt = pos[(0,) * g.d]
    tx = descendant_fiber_representative(g, origin(g), n, index).tree
    path = []
    t = tx
    while len(path) < n:
        path.append(t)
        t = t.parent()
    on_path = set(path) | {origin(g).tree}

    one = 1 + 0 * p
    memo = {}

    def subtree(t, depth):
        has_t = t in on_path
        if not has_t and (depth, False) in memo:
            return memo[(depth, False)]
        flags = [0] * nf
        if depth == n and t == tx:
            if target == "fiber":
                flags = [_TGT] * nf
            else:
                flags[zero_pt] = _TGT
        dist = {(tuple(range(nf)), tuple(flags)): one}
        if depth < n:
            for dgt in range(g.k - 1):
                c = t.child(dgt, g.k)
                cd = subtree(c, depth + 1)
                joint = {}
                for (cl, cf), wc in cd.items():
                    for (tl, tf), wt in dist.items():
                        labels = tl + tuple(x + len(tf) for x in cl)
                        st = (labels, tf + cf)
                        joint[st] = joint.get(st, 0) + wt * wc
                joint = _add_edges(joint, [(i, nf + i) for i in range(nf)], p)
                dist = {}
                for (labels, fl), wj in joint.items():
                    tl = labels[:nf]
                    keep = {}
                    for b in tl:
                        keep.setdefault(b, len(keep))
                    newf = [0] * len(keep)
                    for b, nb in keep.items():
                        newf[nb] = fl[b]
                    st = (tuple(keep[b] for b in tl), tuple(newf))
                    dist[st] = dist.get(st, 0) + wj
        if not (first_visit and depth == n):
            dist = _add_edges(dist, horiz, p)
        if not has_t:
            memo[(depth, False)] = dist
        return dist

    if n == 0:
        return one
    root = subtree(origin(g).tree, 0)
    total = 0 * p
    for (labels, fl), wv in root.items():
        if fl[labels[zero_pt]] & _TGT:
            total += wv
    return total
