"""Monte Carlo estimators for slab-crossing quantities.

Every estimator is built from a *raw* per-replica outcome (an indicator or a
count from one exploration per replica), see :func:`raw_outcome`.  Raw
outcomes are what the monotone coupling acts on; estimates are their means.

Conventions: ``samples`` replicas ``replica0 .. replica0 + samples - 1`` of
the edge randomness keyed by ``seed``.  Indicator means get the binomial
standard error, counts the sample standard error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import (Family, MalformedInputError, descendant_fiber_representative, origin,
                    same_height_target)
from .records import EstimateRecord, SeriesRecord
from .sampler import DEFAULT_BUDGET, DEFAULT_HEIGHT_CAP, explore_batch

CENSOR_FLOOR = 0.01


@dataclass(frozen=True)
class RunOpts:
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    height_cap: int = DEFAULT_HEIGHT_CAP
    workers: int | None = None
    replica0: int = 0
    censor_floor: float = CENSOR_FLOOR


def _opts(opts, kw):
    if opts is None:
        opts = RunOpts(**kw)
    elif kw:
        opts = RunOpts(**{**opts.__dict__, **kw})
    return opts


def _check_common(p, samples):
    if not 0.0 <= p <= 1.0:
        raise MalformedInputError(f"p must lie in [0, 1], got {p}")
    if samples < 1:
        raise MalformedInputError("samples must be >= 1")


def target_tree(g, n, index=0):
    return descendant_fiber_representative(g, origin(g), n, index).tree


# ---------------------------------------------------------------- raw outcomes

def raw_outcome(quantity, g, p, samples, opts=None, **params):
    """Per-replica outcomes of ``quantity`` as ``(values, censored, window)``.

    Quantities and their parameters:

    ``P``, ``E``, ``Q``, ``B`` (n, index=0, fiber_window=None), ``X`` (l, a, b),
    ``chi`` (lam, cap), ``H`` (lam, cap), ``D`` (n), ``U`` (n), ``fiber`` (cap),
    ``point_to_fiber`` (m, cap), ``cover`` (n).
    """
    opts = opts or RunOpts()
    run = dict(seed=opts.seed, replica0=opts.replica0, budget=opts.budget, workers=opts.workers)
    k = g.k
    q = quantity
    if q in ("P", "E", "Q", "B"):
        n = params["n"]
        if n < 0 or (q in ("Q", "B") and n < 1):
            raise MalformedInputError(f"n={n} out of range for {q}")
        t = target_tree(g, n, params.get("index", 0))
        res = explore_batch(g, p, (-n, 0), samples, targets=[t], first_visit_stop=q in ("Q", "B"),
                            fiber_window=params.get("fiber_window"), **run)
        if q == "P" or q == "B":
            vals = (res.hits[:, 0] > 0).astype(float)
        elif q == "E":
            vals = res.hits[:, 0].astype(float)
        else:
            vals = res.exact[:, 0].astype(float)
        return vals, res.censored, (-n, 0)
    if q == "X":
        l, a, b = params["l"], params["a"], params["b"]
        cap = opts.height_cap
        a = -cap if a is None else a
        b = cap if b is None else b
        if not a <= l <= b or not a <= 0 <= b:
            raise MalformedInputError(f"need a <= l <= b and a <= 0 <= b, got l={l}, a={a}, b={b}")
        res = explore_batch(g, p, (a, b), samples, **run)
        return res.level(l).astype(float), res.censored, (a, b)
    if q in ("chi", "H"):
        lam, cap = params["lam"], params.get("cap", opts.height_cap)
        if cap < 1:
            raise MalformedInputError("height cap must be >= 1")
        if q == "chi":
            res = explore_batch(g, p, (-cap, cap), samples, **run)
            ls = np.arange(-cap, cap + 1)
            wts = float(k - 1) ** (lam * ls)
        else:
            res = explore_batch(g, p, (-cap, 0), samples, **run)
            ls = np.arange(-cap, 1)
            wts = float(k - 1) ** (lam * ls)
        return res.levels.astype(float) @ wts, res.censored, (res.lo, res.hi)
    if q == "D":
        n = params["n"]
        res = explore_batch(g, p, (-n, 0), samples, **run)
        return res.level(-n).astype(float), res.censored, (-n, 0)
    if q == "U":
        n = params["n"]
        res = explore_batch(g, p, (0, n), samples, **run)
        return res.level(n).astype(float), res.censored, (0, n)
    if q == "fiber":
        cap = params.get("cap", opts.height_cap)
        res = explore_batch(g, p, (-cap, cap), samples, targets=[origin(g).tree], **run)
        return res.hits[:, 0].astype(float), res.censored, (-cap, cap)
    if q == "point_to_fiber":
        m, cap = params["m"], params.get("cap", opts.height_cap)
        if m // 2 > cap:
            raise MalformedInputError("target lies outside the height cap")
        res = explore_batch(g, p, (-cap, cap), samples, targets=[same_height_target(m)], **run)
        return (res.hits[:, 0] > 0).astype(float), res.censored, (-cap, cap)
    if q == "cover":
        n = params["n"]
        res = explore_batch(g, p, (-n, 0), samples, **run)
        return res.tree_level(-n).astype(float), res.censored, (-n, 0)
    raise MalformedInputError(f"unknown quantity {quantity!r}")


def mean_stderr(vals, indicator=False):
    vals = np.asarray(vals, dtype=float)
    n = len(vals)
    m = float(vals.mean())
    if indicator:
        se = math.sqrt(max(m * (1 - m), 0.0) / n)
    else:
        se = float(vals.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return m, se


def _params(g, p, n=None, lam=None, window=(None, None), budget=None, **extra):
    out = {"family": g.family.value, "k": g.k, "d": g.d, "p": p, "n": "" if n is None else n,
           "lambda": "" if lam is None else lam, "window_lo": window[0], "window_hi": window[1],
           "budget": budget}
    out.update(extra)
    return out


def _record(quantity, g, p, vals, cens, window, opts, indicator, n=None, lam=None, **extra):
    m, se = mean_stderr(vals, indicator)
    cr = float(np.mean(cens)) if len(cens) else 0.0
    warn = ""
    if cr > opts.censor_floor:
        warn = f"censor rate {cr:.3g} above floor {opts.censor_floor}"
    elif cr > 0:
        warn = "censored replicas present"
    return EstimateRecord(quantity, _params(g, p, n, lam, window, opts.budget, height_cap=opts.height_cap,
                                            **extra),
                          m, se, len(vals), cr, opts.seed, warn)


# ---------------------------------------------------------------- estimators

def estimate_P(g, p, n, samples, opts=None, index=0, fiber_window=None, **kw):
    """P_p(n): probability that o reaches the fiber of a depth-n descendant inside L_{-n,0}."""
    _check_common(p, samples)
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("P", g, p, samples, opts, n=n, index=index, fiber_window=fiber_window)
    return _record("P", g, p, vals, cens, win, opts, True, n=n)


def estimate_E(g, p, n, samples, opts=None, index=0, fiber_window=None, **kw):
    """E_p(n): expected number of sites of that fiber reached inside L_{-n,0}."""
    _check_common(p, samples)
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("E", g, p, samples, opts, n=n, index=index, fiber_window=fiber_window)
    return _record("E", g, p, vals, cens, win, opts, False, n=n)


def estimate_Q(g, p, n, samples, opts=None, index=0, fiber_window=None, **kw):
    """Q_p(n): o reaches the site (v, same fiber coordinate) visiting depth n only at the end."""
    _check_common(p, samples)
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("Q", g, p, samples, opts, n=n, index=index, fiber_window=fiber_window)
    return _record("Q", g, p, vals, cens, win, opts, True, n=n)


def estimate_B(g, p, n, samples, opts=None, index=0, **kw):
    """Fiber version of Q: some site of the target fiber reached with a first visit at depth n."""
    _check_common(p, samples)
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("B", g, p, samples, opts, n=n, index=index)
    return _record("B", g, p, vals, cens, win, opts, True, n=n)


def estimate_X(g, p, l, a, b, samples, opts=None, **kw):
    """E X_l^{a,b}: mean number of level-l sites joined to o inside L_{a,b} (None = height cap)."""
    _check_common(p, samples)
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("X", g, p, samples, opts, l=l, a=a, b=b)
    return _record("X", g, p, vals, cens, win, opts, False, n=l, l=l)


def estimate_chi(g, p, lam, height_cap, samples, opts=None, **kw):
    """Tilted susceptibility truncated to heights [-L, L]; biased low by the truncation."""
    _check_common(p, samples)
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("chi", g, p, samples, opts, lam=lam, cap=height_cap)
    rec = _record("chi", g, p, vals, cens, win, opts, False, lam=lam)
    rec.params["truncation"] = "heights [-L, L]; lower bound"
    return rec


def estimate_H(g, p, lam, height_cap, samples, opts=None, **kw):
    """Half-space series sum_{n>=0} (k-1)^(-lam n) E X_{-n}^{-L,0}."""
    _check_common(p, samples)
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("H", g, p, samples, opts, lam=lam, cap=height_cap)
    rec = _record("H", g, p, vals, cens, win, opts, False, lam=lam)
    rec.params["truncation"] = "depth L; lower bound"
    return rec


def estimate_D_U(g, p, n, samples, opts=None, **kw):
    """D_p(n) = E X_{-n}^{-n,0} directly; U_p(n) both as (k-1)^-n D and directly as E X_n^{0,n}.

    Returns ``(D, U_from_D, U_direct)``.
    """
    _check_common(p, samples)
    if n < 0:
        raise MalformedInputError("n must be >= 0")
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("D", g, p, samples, opts, n=n)
    D = _record("D", g, p, vals, cens, win, opts, False, n=n)
    scale = float(g.k - 1) ** (-n)
    U = EstimateRecord("U", dict(D.params, method="mtp"), D.value * scale, D.stderr * scale,
                       D.n_samples, D.censor_rate, D.seed, D.warning)
    uv, uc, uw = raw_outcome("U", g, p, samples, opts, n=n)
    Ud = _record("U", g, p, uv, uc, uw, opts, False, n=n, method="direct")
    return D, U, Ud


def estimate_fiber_count(g, p, samples, opts=None, **kw):
    """E|K_o cap [o]| with heights capped at +-height_cap."""
    _check_common(p, samples)
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("fiber", g, p, samples, opts, cap=opts.height_cap)
    return _record("fiber_count", g, p, vals, cens, win, opts, False)


# ---------------------------------------------------------------- log-linear fits

def fit_log_linear(x, M, negate=False):
    """OLS slope of log(column means of M) against x, with a delta-method standard error.

    ``M`` holds per-replica contributions (rows = replicas), so correlations
    between the columns are accounted for.  Returns ``(slope, stderr)``; with
    ``negate`` the fitted line is -log(mean).
    """
    x = np.asarray(x, dtype=float)
    M = np.asarray(M, dtype=float)
    means = M.mean(axis=0)
    if np.any(means <= 0):
        raise ValueError("cannot fit through zero means")
    y = np.log(means)
    c = (x - x.mean()) / np.sum((x - x.mean()) ** 2)
    slope = float(c @ y)
    n = M.shape[0]
    if n > 1:
        cov = np.atleast_2d(np.cov(M, rowvar=False)) / n
        g = c / means
        var = float(g @ cov @ g)
    else:
        var = 0.0
    se = math.sqrt(max(var, 0.0))
    return (-slope if negate else slope), se


def upper_half(ns):
    ns = list(ns)
    cut = ns[-1] / 2
    return [n for n in ns if n >= cut]


def estimate_beta_star(g, p, n_max, samples, opts=None, **kw):
    """Per-n values -log P(n) / (n log(k-1)), the Fekete bound and an upper-half slope fit.

    The same replica indices are used for every n, so the fit error accounts
    for the correlation between depths.
    """
    _check_common(p, samples)
    if n_max < 2:
        raise MalformedInputError("n_max must be >= 2")
    opts = _opts(opts, kw)
    lk = math.log(g.k - 1)
    ns = list(range(1, n_max + 1))
    cols = []
    recs = []
    excluded = []
    for n in ns:
        vals, cens, win = raw_outcome("P", g, p, samples, opts, n=n)
        cols.append(vals)
        P = _record("P", g, p, vals, cens, win, opts, True, n=n)
        if P.value == 0:
            excluded.append(n)
            continue
        recs.append(EstimateRecord("beta_n", dict(P.params), -math.log(P.value) / (n * lk),
                                   P.stderr / (P.value * n * lk), P.n_samples, P.censor_rate, P.seed,
                                   P.warning, extra={"P": P.value, "P_stderr": P.stderr}))
    M = np.column_stack(cols)
    means = M.mean(axis=0)
    fek = [(-math.log(p * means[i]) / (n * lk)) for i, n in enumerate(ns) if means[i] > 0 and p > 0]
    fekete = min(fek) if fek else math.inf
    fit_ns = [n for n in upper_half(ns) if n not in excluded]
    summary = {"fekete_upper_bound": fekete, "fit_ns": fit_ns, "excluded": excluded, "samples": samples}
    if p == 1.0:
        summary.update(slope=0.0, slope_stderr=0.0)
    elif len(fit_ns) >= 2:
        idx = [n - 1 for n in fit_ns]
        slope, se = fit_log_linear(np.array(fit_ns) * lk, M[:, idx], negate=True)
        summary.update(slope=slope, slope_stderr=se)
    else:
        summary.update(slope=math.nan, slope_stderr=math.nan, warning="too few nonzero P values to fit")
    return SeriesRecord("beta_star", [n for n in ns if n not in excluded], recs, summary)


def beta_star_record(series, g, p, opts):
    s = series.summary
    val = s.get("slope", math.nan)
    se = s.get("slope_stderr", math.nan)
    warn = s.get("warning", "")
    if s.get("excluded"):
        warn = (warn + "; " if warn else "") + f"P=0 at n={s['excluded']}"
    n_top = series.index[-1] if series.index else 0
    return EstimateRecord("beta_star", _params(g, p, n_top, None, (-n_top, 0), opts.budget,
                                               fekete=s["fekete_upper_bound"]),
                          val if math.isfinite(val) else 0.0, se if math.isfinite(se) else 0.0,
                          s["samples"], max((r.censor_rate for r in series.records), default=0.0), opts.seed, warn,
                          extra=dict(s))


def estimate_point_to_fiber(g, p, m, samples, opts=None, **kw):
    """Probability that o reaches the fiber over a same-height tree vertex at distance m."""
    _check_common(p, samples)
    opts = _opts(opts, kw)
    vals, cens, win = raw_outcome("point_to_fiber", g, p, samples, opts, m=m, cap=opts.height_cap)
    return _record("point_to_fiber", g, p, vals, cens, win, opts, True, n=m)


def point_to_fiber_curve(g, p, m_max, samples, opts=None, **kw):
    """Point-to-fiber probabilities for m = 0, 2, ..., m_max from one exploration per replica.

    Returns ``(ms, M, censored)`` with per-replica indicators in the columns of M.
    """
    _check_common(p, samples)
    opts = _opts(opts, kw)
    ms = list(range(0, m_max + 1, 2))
    cap = opts.height_cap
    if m_max // 2 > cap:
        raise MalformedInputError("targets lie outside the height cap")
    res = explore_batch(g, p, (-cap, cap), samples, seed=opts.seed, replica0=opts.replica0,
                        targets=[same_height_target(m) for m in ms], budget=opts.budget, workers=opts.workers)
    return ms, (res.hits > 0).astype(float), res.censored


def fit_point_to_fiber_rate(ms, M, m_min=2):
    """Decay rate c in P(m) ~ exp(-c m), fitted over m >= m_min with nonzero estimates."""
    means = M.mean(axis=0)
    use = [i for i, m in enumerate(ms) if m >= m_min and means[i] > 0]
    if len(use) < 2:
        return math.nan, math.nan, [ms[i] for i in use]
    rate, se = fit_log_linear(np.array([ms[i] for i in use]), M[:, use], negate=True)
    return rate, se, [ms[i] for i in use]


@dataclass
class FiberTail:
    ns: np.ndarray
    tail: np.ndarray
    tail_stderr: np.ndarray
    rate: float
    rate_stderr: float
    t_stat: float
    fit_ns: list
    censor_rate: float
    n_samples: int
    warning: str = ""

    def to_records(self, g, p, opts):
        out = []
        for n, t, s in zip(self.ns, self.tail, self.tail_stderr):
            out.append(EstimateRecord("fiber_tail", _params(g, p, int(n), None, (-opts.height_cap, opts.height_cap),
                                                            opts.budget),
                                      float(t), float(s), self.n_samples, self.censor_rate, opts.seed, self.warning))
        out.append(EstimateRecord("fiber_tail_rate", _params(g, p, None, None, (-opts.height_cap, opts.height_cap),
                                                             opts.budget, t_stat=self.t_stat),
                                  self.rate if math.isfinite(self.rate) else 0.0,
                                  self.rate_stderr if math.isfinite(self.rate_stderr) else 0.0,
                                  self.n_samples, self.censor_rate, opts.seed,
                                  self.warning or ("" if math.isfinite(self.rate) else "no fit")))
        return out


def estimate_fiber_tail(g, p, samples, opts=None, min_events=10, **kw):
    """Empirical tail P(|K_o cap [o]| >= n) and an exponential fit of its top decade.

    The fit uses n from max(2, n_top / 10) to n_top, where n_top is the
    largest n with at least ``min_events`` exceedances.
    """
    _check_common(p, samples)
    if p >= 1.0:
        raise MalformedInputError("fiber tail needs p < 1")
    opts = _opts(opts, kw)
    vals, cens, _ = raw_outcome("fiber", g, p, samples, opts, cap=opts.height_cap)
    cr = float(np.mean(cens))
    counts = vals.astype(np.int64)
    top = int(counts.max())
    ns = np.arange(1, top + 1)
    exceed = np.array([(counts >= n).sum() for n in ns])
    tail = exceed / samples
    tse = np.sqrt(tail * (1 - tail) / samples)
    warn = ""
    rate = se = t = math.nan
    fit_ns = []
    if cr > opts.censor_floor:
        warn = f"censor rate {cr:.3g} above floor; no fit"
    else:
        good = ns[exceed >= min_events]
        if len(good):
            n_top = int(good.max())
            lo = max(2, math.ceil(n_top / 10))
            fit_ns = [int(n) for n in good if lo <= n <= n_top]
        if len(fit_ns) >= 2:
            M = np.column_stack([(counts >= n).astype(float) for n in fit_ns])
            rate, se = fit_log_linear(np.array(fit_ns, dtype=float), M, negate=True)
            t = rate / se if se > 0 else math.inf
        else:
            warn = "fewer than two tail points with enough events; no fit"
    return FiberTail(ns, tail, tse, rate, se, t, fit_ns, cr, samples, warn)
