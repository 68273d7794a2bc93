"""Branching processes embedded in percolation on T x Z^d.

Z: each particle x explores its own depth-N slab below x with first-visit
stopping; for every depth-N descendant fiber it reaches, one of the reached
sites is picked uniformly and becomes a child.  Children of distinct
particles lie over distinct tree vertices, so their slabs are disjoint and
the generation sizes form a genuine Galton-Watson process.  (This is checked
at runtime.)

W: the sub-process of Z observed every ``stride`` generations, keeping only
particles in the identity fiber coordinate whose ancestor was kept.

Y^{h,g}: a process on tree vertices; v (depth r below u) is a child of u if
both (u,h) -> (v,h) and (u,g) -> (v,g) first-visit connections occur.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import RunOpts, _opts, mean_stderr
from .graph import Family, MalformedInputError, SiteId, TreeVertex, origin
from .records import EstimateRecord
from .sampler import SampleCtx, descent_digits, explore_batch, explore_single

MAX_PARTICLES = 20000


class SlabOverlapError(AssertionError):
    pass


@dataclass
class BranchingRun:
    process: str
    params: dict
    generation_sizes: list
    survived: bool
    offspring: list = field(default_factory=list)      # per-parent child counts, all generations
    genealogy: list = field(default_factory=list, repr=False)  # per generation: list of (site, parent index)
    censored: bool = False
    truncated: bool = False

    def to_json(self):
        return json.dumps({"process": self.process, "params": self.params,
                           "generation_sizes": self.generation_sizes, "survived": self.survived})


def _require_txz(g):
    if g.family is not Family.TXZ:
        raise MalformedInputError("embedded branching processes are defined on T x Z^d")


def _fiber_of(g, a, b):
    return (int(a),) if g.d == 1 else (int(a), int(b))


def _bottom_hits(ctx, g, x, N, budget):
    """Sites at relative height -N reached from x by first-visit paths, grouped by tree vertex."""
    view, sites = explore_single(ctx, g, x, (-N, 0), budget=budget, first_visit_stop=True)
    groups = {}
    idx = np.flatnonzero(sites["rel_height"] == -N)
    for i in idx:
        digits = descent_digits(sites, i)
        t = x.tree
        for dgt in digits:
            t = t.child(dgt, g.k)
        groups.setdefault(t, []).append(_fiber_of(g, sites["a"][i], sites["b"][i]))
    return groups, view["censored"]


def run_Z(g, p, N, generations, seed=0, replica=0, budget=10**6, max_particles=MAX_PARTICLES):
    """Simulate Z for ``generations`` steps in replica ``replica`` of the edge randomness."""
    _require_txz(g)
    if N < 1:
        raise MalformedInputError("N must be >= 1")
    ctx = SampleCtx(seed, replica, p)
    o = origin(g)
    gen = [(o, -1)]
    genealogy = [gen]
    sizes = [1]
    offspring = []
    censored = truncated = False
    for t in range(generations):
        rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), replica, t, 0x5A]))
        nxt = []
        for pi, (x, _) in enumerate(gen):
            groups, cens = _bottom_hits(ctx, g, x, N, budget)
            censored |= cens
            kids = 0
            for tv in sorted(groups):
                fibers = sorted(groups[tv])
                pick = fibers[int(rng.integers(len(fibers)))]
                nxt.append((SiteId(tv, pick), pi))
                kids += 1
            offspring.append(kids)
        trees = [s.tree for s, _ in nxt]
        if len(set(trees)) != len(trees):
            raise SlabOverlapError(f"two particles share a tree vertex in generation {t + 1}")
        sizes.append(len(nxt))
        genealogy.append(nxt)
        gen = nxt
        if not gen:
            break
        if len(gen) > max_particles:
            truncated = True
            break
    return BranchingRun("Z", {"p": p, "N": N, "k": g.k, "d": g.d, "seed": seed, "replica": replica},
                        sizes, sizes[-1] > 0, offspring, genealogy, censored, truncated)


def w_from_z(run, stride):
    """W observed every ``stride`` Z-generations: identity fiber coordinate, kept ancestry."""
    if run.process != "Z":
        raise MalformedInputError("W is extracted from a Z run")
    gens = run.genealogy
    kept = {0}
    sizes = [1]
    offspring = []
    for lvl in range(1, (len(gens) - 1) // stride + 1):
        # ancestor (in generation (lvl-1)*stride) of each particle in generation lvl*stride
        anc = list(range(len(gens[lvl * stride])))
        for gi in range(lvl * stride, (lvl - 1) * stride, -1):
            anc = [gens[gi][a][1] for a in anc]
        zero = tuple(0 for _ in gens[0][0][0].fiber)
        now = set()
        per_parent = {a: 0 for a in kept}
        for i, (site, _) in enumerate(gens[lvl * stride]):
            if site.fiber == zero and anc[i] in kept:
                now.add(i)
                per_parent[anc[i]] += 1
        offspring.extend(per_parent[a] for a in sorted(per_parent))
        kept = now
        sizes.append(len(now))
        if not now:
            break
    return BranchingRun("W", dict(run.params, stride=stride), sizes, sizes[-1] > 0, offspring)


def _descendants(g, u, r):
    out = [u]
    for _ in range(r):
        out = [t.child(dgt, g.k) for t in out for dgt in range(g.k - 1)]
    return out


def run_Y(g, p, r, h, gpt, generations, seed=0, replica=0, budget=10**6, max_particles=MAX_PARTICLES):
    """Simulate Y^{h,g} with depth step ``r``; ``h`` and ``gpt`` are fiber points."""
    _require_txz(g)
    if r < 1:
        raise MalformedInputError("r must be >= 1")
    h = tuple(h) if isinstance(h, (tuple, list)) else (h,) + (0,) * (g.d - 1)
    gpt = tuple(gpt) if isinstance(gpt, (tuple, list)) else (gpt,) + (0,) * (g.d - 1)
    gen = [origin(g).tree]
    sizes = [1]
    offspring = []
    censored = truncated = False
    cap = (g.k - 1) ** r
    for _ in range(generations):
        nxt = []
        for u in gen:
            targets = _descendants(g, u, r)
            both = None
            for f in (h, gpt):
                res = explore_batch(g, p, (-r, 0), 1, seed=seed, replica0=replica, base=SiteId(u, f),
                                    targets=targets, first_visit_stop=True, budget=budget, workers=1)
                censored |= bool(res.censored[0])
                hit = res.exact[0].astype(bool)
                both = hit if both is None else both & hit
            kids = [t for t, b in zip(targets, both) if b]
            if len(kids) > cap:
                raise AssertionError("offspring bound violated")
            offspring.append(len(kids))
            nxt.extend(kids)
        sizes.append(len(nxt))
        gen = nxt
        if not gen:
            break
        if len(gen) > max_particles:
            truncated = True
            break
    return BranchingRun("Y", {"p": p, "r": r, "h": list(h), "g": list(gpt), "k": g.k, "d": g.d,
                              "seed": seed, "replica": replica},
                        sizes, sizes[-1] > 0, offspring, [], censored, truncated)


def joint_first_visit(g, p, r, h, gpt, samples, opts=None, index=0, **kw):
    """Probabilities of the two first-visit events to one depth-r target and of their intersection.

    Returns ``(joint, marg_h, marg_g)`` records.
    """
    _require_txz(g)
    opts = _opts(opts, kw)
    h = tuple(h) if isinstance(h, (tuple, list)) else (h,) + (0,) * (g.d - 1)
    gpt = tuple(gpt) if isinstance(gpt, (tuple, list)) else (gpt,) + (0,) * (g.d - 1)
    t = _descendants(g, origin(g).tree, r)[index]
    ind = []
    cens = np.zeros(samples, bool)
    for f in (h, gpt):
        res = explore_batch(g, p, (-r, 0), samples, seed=opts.seed, replica0=opts.replica0,
                            base=SiteId(origin(g).tree, f), targets=[t], first_visit_stop=True,
                            budget=opts.budget, workers=opts.workers)
        ind.append(res.exact[:, 0].astype(float))
        cens |= res.censored
    out = []
    for name, v in (("A_joint", ind[0] * ind[1]), ("A_h", ind[0]), ("A_g", ind[1])):
        m, se = mean_stderr(v, True)
        out.append(EstimateRecord(name, {"family": g.family.value, "k": g.k, "d": g.d, "p": p, "n": r,
                                         "h": list(h), "g": list(gpt)},
                                  m, se, samples, float(cens.mean()), opts.seed))
    return tuple(out)


def gw_survival_from_offspring(offspring, tol=1e-13, max_iter=100000):
    """1 - smallest fixed point in [0, 1] of the empirical offspring pgf."""
    offspring = np.asarray(offspring, dtype=np.int64)
    if len(offspring) == 0:
        return 0.0
    probs = np.bincount(offspring) / len(offspring)
    mean = float(np.arange(len(probs)) @ probs)
    if mean <= 1.0:
        return 0.0
    s = 0.0
    for _ in range(max_iter):
        s_new = float(np.polyval(probs[::-1], s))
        if abs(s_new - s) < tol:
            s = s_new
            break
        s = s_new
    return 1.0 - s


@dataclass
class SurvivalEstimate:
    fraction: float
    stderr: float
    n_runs: int
    gw_fixed_point: float
    offspring_mean: float


def survival_probability(runs):
    """Fraction of runs alive at the horizon plus the Galton-Watson fixed-point estimate."""
    runs = list(runs)
    if not runs:
        raise MalformedInputError("need at least one run")
    alive = np.array([1.0 if r.survived else 0.0 for r in runs])
    frac, se = mean_stderr(alive, True)
    off = [c for r in runs for c in r.offspring]
    return SurvivalEstimate(frac, se, len(runs), gw_survival_from_offspring(off),
                            float(np.mean(off)) if off else 0.0)


def martingale_ratios(runs):
    """Ratios size(t+1)/size(t) over all runs and generations with size(t) > 0."""
    out = []
    for r in runs:
        s = r.generation_sizes
        for a, b in zip(s, s[1:]):
            if a > 0:
                out.append(b / a)
    return np.array(out)


def projected_kernel(runs, dim=0):
    """Empirical histogram of child fiber displacement relative to the parent (Z runs)."""
    hist = {}
    total = 0
    for r in runs:
        gens = r.genealogy
        for t in range(1, len(gens)):
            for site, pi in gens[t]:
                parent = gens[t - 1][pi][0]
                dx = site.fiber[dim] - parent.fiber[dim]
                hist[dx] = hist.get(dx, 0) + 1
                total += 1
    return {k: v / total for k, v in sorted(hist.items())} if total else {}
