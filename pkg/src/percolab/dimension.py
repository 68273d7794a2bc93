"""Boundary limit-set dimension from level covers.

``count(n)`` is the number of depth-n descendants v of the origin whose fiber
is reached from o inside L_{-n,0}.  Each such v is a boundary ball of
diameter (k-1)^-n, so count(n) is the size of a level-n cover of the limit
set.  The dimension estimate is the growth rate of the mean cover size,
conditioned on the cluster surviving to the deepest level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import RunOpts, _opts, _params, fit_log_linear, upper_half
from .graph import MalformedInputError
from .records import EstimateRecord
from .sampler import explore_batch

SURVIVAL_FLOOR = 1e-3


@dataclass
class CoverCounts:
    n_max: int
    counts: np.ndarray        # survivors x (n_max + 1), window [-n, 0] per column
    reach: np.ndarray         # survivors x (n_max + 1), from the single window [-n_max, 0]
    attempts: int
    uncond_mean: np.ndarray   # mean of count(n) over all attempted replicas
    uncond_stderr: np.ndarray
    censor_rate: float
    warning: str = ""
    survivor_ids: np.ndarray = field(default=None, repr=False)

    @property
    def survivors(self):
        return self.counts.shape[0]

    @property
    def survival_rate(self):
        return self.survivors / self.attempts if self.attempts else 0.0

    def conditional_mean(self):
        return self.counts.mean(axis=0) if self.survivors else np.zeros(self.n_max + 1)

    def theta_sums(self, theta, k):
        """Mean of sum over the cover of diam^theta, per level."""
        ns = np.arange(self.n_max + 1)
        return self.conditional_mean() * float(k - 1) ** (-theta * ns)


def _levels_for_chunk(g, p, n_max, start, size, opts):
    cols = np.zeros((size, n_max + 1))
    cens = np.zeros(size, bool)
    cols[:, 0] = 1
    for n in range(1, n_max + 1):
        res = explore_batch(g, p, (-n, 0), size, seed=opts.seed, replica0=start, budget=opts.budget,
                            workers=opts.workers)
        cols[:, n] = res.tree_level(-n)
        cens |= res.censored
    deep = explore_batch(g, p, (-n_max, 0), size, seed=opts.seed, replica0=start, budget=opts.budget,
                         workers=opts.workers)
    reach = deep.tree_levels[:, ::-1].astype(float)
    return cols, reach, cens | deep.censored


def cover_counts(g, p, n_max, samples, opts=None, max_attempts=None, **kw):
    """Cover sizes for replicas that survive to depth ``n_max``, collected by rejection.

    Replicas are scanned in index order from ``opts.replica0`` and the first
    ``samples`` survivors are kept, so the result is deterministic.
    """
    if n_max < 2:
        raise MalformedInputError("n_max must be >= 2")
    if samples < 1:
        raise MalformedInputError("samples must be >= 1")
    opts = _opts(opts, kw)
    max_attempts = max_attempts or max(100 * samples, 10**5)
    kept, kept_reach, ids = [], [], []
    all_cols = []
    cens_all = []
    start = opts.replica0
    have = 0
    chunk = max(2 * samples, 1000)
    while have < samples and start - opts.replica0 < max_attempts:
        size = min(chunk, opts.replica0 + max_attempts - start)
        cols, reach, cens = _levels_for_chunk(g, p, n_max, start, size, opts)
        surv = np.flatnonzero(reach[:, n_max] >= 1)
        need = samples - have
        if len(surv) >= need:
            last = surv[need - 1] + 1
            cols, reach, cens = cols[:last], reach[:last], cens[:last]
            surv = surv[:need]
        all_cols.append(cols)
        cens_all.append(cens)
        kept.append(cols[surv])
        kept_reach.append(reach[surv])
        ids.append(surv + start)
        have += len(surv)
        start += len(cols)
        chunk = min(4 * chunk, 10**6)
    attempts = start - opts.replica0
    allc = np.vstack(all_cols)
    counts = np.vstack(kept) if kept else np.zeros((0, n_max + 1))
    reach = np.vstack(kept_reach) if kept_reach else np.zeros((0, n_max + 1))
    cens = np.concatenate(cens_all)
    se = allc.std(axis=0, ddof=1) / math.sqrt(len(allc)) if len(allc) > 1 else np.zeros(n_max + 1)
    warn = ""
    if have < samples:
        warn = f"only {have} survivors in {attempts} attempts"
    elif have / attempts < SURVIVAL_FLOOR:
        warn = f"survival rate {have / attempts:.3g} below floor"
    # each covered vertex at depth n+1 has a covered parent at depth n
    if len(reach) and np.any(reach[:, 1:] > (g.k - 1) * reach[:, :-1]):
        raise AssertionError("cover refinement violated")
    return CoverCounts(n_max, counts, reach, attempts, allc.mean(axis=0), se, float(cens.mean()), warn,
                       np.concatenate(ids) if ids else np.zeros(0, int))


def dimension_from_covers(cc, k):
    """Upper-half slope of log(conditional mean cover size) against n log(k-1)."""
    ns = list(range(1, cc.n_max + 1))
    fit = upper_half(ns)
    if cc.survivors < 2:
        return math.nan, math.nan, fit
    means = cc.counts.mean(axis=0)
    if np.all(cc.counts[:, fit] == np.array([(k - 1) ** n for n in fit])):
        return 1.0, 0.0, fit
    slope, se = fit_log_linear(np.array(fit) * math.log(k - 1), cc.counts[:, fit])
    return slope, se, fit


def dimension_estimate(g, p, n_max, samples, opts=None, **kw):
    """Dimension of the boundary limit set at depth ``n_max`` with ``samples`` survivors."""
    opts = _opts(opts, kw)
    if p == 0:
        raise MalformedInputError("no survival at p = 0")
    cc = cover_counts(g, p, n_max, samples, opts)
    dim, se, fit = dimension_from_covers(cc, g.k)
    rec = EstimateRecord("dimension", _params(g, p, n_max, None, (-n_max, 0), opts.budget),
                         dim if math.isfinite(dim) else 0.0, se if math.isfinite(se) else 0.0,
                         cc.survivors, cc.censor_rate, opts.seed, cc.warning,
                         extra={"fit_ns": fit, "survival_rate": cc.survival_rate, "attempts": cc.attempts})
    return rec, cc


def cover_count_records(cc, g, p, opts):
    out = []
    cm = cc.conditional_mean()
    cs = (cc.counts.std(axis=0, ddof=1) / math.sqrt(cc.survivors)) if cc.survivors > 1 else np.zeros_like(cm)
    for n in range(1, cc.n_max + 1):
        out.append(EstimateRecord("cover_count", _params(g, p, n, None, (-n, 0), opts.budget, conditional=True),
                                  float(cm[n]), float(cs[n]), cc.survivors, cc.censor_rate, opts.seed, cc.warning))
    return out
