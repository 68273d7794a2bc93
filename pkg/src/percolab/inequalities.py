"""Numerical checks of the identities and inequalities between slab quantities.

Each check returns a :class:`CheckReport` with both sides, the combined
standard error and a verdict in {pass, fail, inconclusive}.  Monte Carlo
sides are estimated from disjoint blocks of replica indices so their errors
are independent.  ``nsigma`` (default 3) is the allowed slack in units of
the combined standard error.

Truncation directions, since all the series involved are infinite:

* tilted susceptibility: heights cut to [-L, L], so the estimate is low;
* half-space series H: depth cut at L, low;
* Hammersley-Welsh right side: exponent summed to N only, low;
* fiber intersection: heights cut to [-L, L], low.

A low right side makes "LHS <= RHS" checks conservative; a low left side
makes them optimistic, hence the caveat attached to those reports.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import oracle
from .estimators import (RunOpts, _opts, estimate_chi, estimate_E, estimate_fiber_count, estimate_H,
                         estimate_P, estimate_Q, estimate_X, fit_point_to_fiber_rate, mean_stderr,
                         point_to_fiber_curve, raw_outcome, target_tree)
from .graph import Family, GraphSpec
from .sampler import explore_batch

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
MIN_SAMPLES = 100


@dataclass
class CheckReport:
    check: str
    params: dict
    lhs: float
    rhs: float
    sigma: float
    verdict: str
    note: str = ""

    def to_dict(self):
        d = asdict(self)
        for key in ("lhs", "rhs", "sigma"):
            v = d[key]
            d[key] = float(v) if not isinstance(v, float) else v
            if not math.isfinite(d[key]):
                d[key] = str(d[key])
        return d


def reports_to_json(reports):
    return json.dumps([r.to_dict() for r in reports], indent=2, default=str)


def _block(opts, i, samples):
    """Options for the i-th disjoint block of replica indices."""
    return RunOpts(**{**opts.__dict__, "replica0": opts.replica0 + i * samples})


def _gparams(g, **kw):
    return {"family": g.family.value, "k": g.k, "d": g.d, **kw}


def _le(lhs, rhs, sigma, nsigma):
    return PASS if lhs <= rhs + nsigma * sigma else FAIL


def _ge(lhs, rhs, sigma, nsigma):
    return PASS if lhs >= rhs - nsigma * sigma else FAIL


# ---------------------------------------------------------------- tilted MTP

def check_mtp(g, p, cases, samples, opts=None, nsigma=3.0, **kw):
    """E X_l^{a,b} against (k-1)^{-l} E X_{-l}^{a-l,b-l} for each (l, a, b)."""
    opts = _opts(opts, kw)
    out = []
    for l, a, b in cases:
        prm = _gparams(g, p=p, l=l, a=a, b=b, samples=samples, seed=opts.seed)
        if p == 0:
            v = 1.0 if l == 0 else 0.0
            out.append(CheckReport("mtp", prm, v, v, 0.0, PASS, "p=0: only the origin"))
            continue
        L = estimate_X(g, p, l, a, b, samples, _block(opts, 0, samples))
        R = estimate_X(g, p, -l, a - l, b - l, samples, _block(opts, 1, samples))
        s = float(g.k - 1) ** (-l)
        rhs, rse = R.value * s, R.stderr * s
        sig = math.hypot(L.stderr, rse)
        if samples < MIN_SAMPLES:
            v = INCONCLUSIVE
        else:
            v = PASS if abs(L.value - rhs) <= nsigma * sig else FAIL
        out.append(CheckReport("mtp", prm, L.value, rhs, sig, v))
    return out


def check_mtp_tree_exact(p, k, cases):
    """Both sides of the MTP identity from tree closed forms, compared exactly."""
    p = Fraction(p)
    out = []
    for l, a, b in cases:
        lhs = oracle.tree_expected_level(p, k, l, a, b)
        rhs = Fraction(k - 1) ** (-l) * oracle.tree_expected_level(p, k, -l, a - l, b - l)
        out.append(CheckReport("mtp_tree_exact", {"family": "tree", "k": k, "p": str(p), "l": l, "a": a, "b": b},
                               lhs, rhs, 0.0, PASS if lhs == rhs else FAIL, "exact rational arithmetic"))
    return out


# ---------------------------------------------------------------- lamplighter backscattering

def check_backscattering_LL(p, n, k, samples, opts=None, nsigma=3.0, **kw):
    """E|K_o cap [o]| >= p^3 (k-1)^(n+1) P_p(n) E_p(n) on the lamplighter graph."""
    opts = _opts(opts, kw)
    g = GraphSpec(Family.LL, k)
    prm = _gparams(g, p=p, n=n, samples=samples, seed=opts.seed, height_cap=opts.height_cap)
    L = estimate_fiber_count(g, p, samples, _block(opts, 0, samples))
    if n == 0:
        P = E = None
        rhs = p ** 3 * (k - 1)
        rse = 0.0
    else:
        P = estimate_P(g, p, n, samples, _block(opts, 1, samples))
        E = estimate_E(g, p, n, samples, _block(opts, 2, samples))
        c = p ** 3 * (k - 1) ** (n + 1)
        rhs = c * P.value * E.value
        rse = c * math.hypot(P.stderr * E.value, E.stderr * P.value)
    sig = math.hypot(L.stderr, rse)
    note = "LHS truncated to heights [-L, L] (low)"
    if samples < MIN_SAMPLES or L.censor_rate > opts.censor_floor:
        v = INCONCLUSIVE
    else:
        v = _ge(L.value, rhs, sig, nsigma)
    return CheckReport("backscattering_ll", prm, L.value, rhs, sig, v, note)


# ---------------------------------------------------------------- Hammersley-Welsh chain

def _diverging(terms):
    """Series looks divergent if its terms stop decreasing over the second half."""
    half = terms[len(terms) // 2:]
    return len(half) >= 2 and half[-1] >= half[0] > 0


def check_hammersley_welsh(g, p, N, height_cap, samples, opts=None, nsigma=3.0, **kw):
    """chi_{p,1/2} <= (E|K_o cap [o]|)^2 exp[2 sum_{n=0}^N (k-1)^{-n/2} D_p(n)]."""
    opts = _opts(opts, kw)
    opts = RunOpts(**{**opts.__dict__, "height_cap": height_cap})
    prm = _gparams(g, p=p, N=N, height_cap=height_cap, samples=samples, seed=opts.seed)
    C = estimate_chi(g, p, 0.5, height_cap, samples, _block(opts, 0, samples))
    F = estimate_fiber_count(g, p, samples, _block(opts, 1, samples))
    # D_p(0) = 1 exactly
    terms, tses = [1.0], [0.0]
    for n in range(1, N + 1):
        vals, _, _ = raw_outcome("D", g, p, samples, _block(opts, 1 + n, samples), n=n)
        m, se = mean_stderr(vals)
        w = float(g.k - 1) ** (-n / 2)
        terms.append(w * m)
        tses.append(w * se)
    S = sum(terms)
    rhs = F.value ** 2 * math.exp(2 * S)
    rel = math.hypot(2 * F.stderr / F.value if F.value else 0.0, 2 * math.sqrt(sum(s * s for s in tses)))
    rse = rhs * rel
    sig = math.hypot(C.stderr, rse)
    note = "both sides truncated (chi to heights +-L, exponent to n<=N); indicative, not rigorous"
    if _diverging(terms):
        return CheckReport("hammersley_welsh", prm, C.value, rhs, sig, INCONCLUSIVE,
                           "regime p >= p_t suspected: exponent terms not decaying")
    cens = max(C.censor_rate, F.censor_rate)
    if samples < MIN_SAMPLES or cens > opts.censor_floor:
        return CheckReport("hammersley_welsh", prm, C.value, rhs, sig, INCONCLUSIVE,
                           note + "; insufficient samples or censoring")
    return CheckReport("hammersley_welsh", prm, C.value, rhs, sig, _le(C.value, rhs, sig, nsigma), note)


def check_series_product(g, p, lam, height_cap, samples, opts=None, nsigma=3.0, **kw):
    """chi_{p,lam} <= H_{p,lam} H_{p,1-lam}."""
    opts = _opts(opts, kw)
    prm = _gparams(g, p=p, lam=lam, height_cap=height_cap, samples=samples, seed=opts.seed)
    C = estimate_chi(g, p, lam, height_cap, samples, _block(opts, 0, samples))
    H1 = estimate_H(g, p, lam, height_cap, samples, _block(opts, 1, samples))
    H2 = estimate_H(g, p, 1 - lam, height_cap, samples, _block(opts, 2, samples))
    rhs = H1.value * H2.value
    rse = math.hypot(H1.stderr * H2.value, H2.stderr * H1.value)
    sig = math.hypot(C.stderr, rse)
    note = "chi and H truncated at height cap (both low)"
    cens = max(C.censor_rate, H1.censor_rate, H2.censor_rate)
    if samples < MIN_SAMPLES or cens > opts.censor_floor:
        return CheckReport("series_product", prm, C.value, rhs, sig, INCONCLUSIVE, note + "; insufficient samples")
    return CheckReport("series_product", prm, C.value, rhs, sig, _le(C.value, rhs, sig, nsigma), note)


# ---------------------------------------------------------------- point-to-fiber

def check_point_to_fiber_rate(g, p, m_max, samples, opts=None, nsigma=3.0, expected=None, **kw):
    """Fitted decay rate of P(o <-> [y]) in m = d(o, y) against (1/2) log(k-1).

    ``sigma`` in the report is the fit standard error; the margin allowed is
    ``nsigma`` of it.  Fewer than one decade of decay is inconclusive.  With
    ``expected`` the rate must also match that value within the same margin.
    """
    opts = _opts(opts, kw)
    half = 0.5 * math.log(g.k - 1)
    prm = _gparams(g, p=p, m_max=m_max, samples=samples, seed=opts.seed, height_cap=opts.height_cap)
    if p == 0:
        return CheckReport("point_to_fiber_rate", prm, math.inf, half, 0.0, PASS, "p=0: all targets unreachable")
    ms, M, cens = point_to_fiber_curve(g, p, m_max, samples, opts)
    rate, se, used = fit_point_to_fiber_rate(ms, M)
    means = M.mean(axis=0)
    extra = {"rate": rate, "rate_stderr": se, "fit_ms": used, "P": [float(x) for x in means]}
    prm.update(extra)
    if not math.isfinite(rate) or samples < MIN_SAMPLES:
        return CheckReport("point_to_fiber_rate", prm, rate, half, se, INCONCLUSIVE, "not enough nonzero points")
    pu = [means[ms.index(m)] for m in used]
    if max(pu) / min(pu) < 10:
        return CheckReport("point_to_fiber_rate", prm, rate, half, se, INCONCLUSIVE, "less than one decade of decay")
    v = _ge(rate, half, se, nsigma)
    if expected is not None:
        prm["expected_rate"] = expected
        if abs(rate - expected) > nsigma * se:
            v = FAIL
    return CheckReport("point_to_fiber_rate", prm, rate, half, se, v)


# ---------------------------------------------------------------- supermultiplicativity and friends

def check_supermultiplicativity_exact(n, m, p, fiber_window=1, k=3, d=1):
    """P(n+m+1) >= p P(n) P(m) on T x Z^d slabs with fibers cut to [-w, w]^d, exact rationals."""
    g = GraphSpec(Family.TXZ, k, d)
    p = Fraction(p)
    P = {j: oracle.fiber_tree_connectivity(g, j, fiber_window, p) for j in {n, m, n + m + 1}}
    lhs, rhs = P[n + m + 1], p * P[n] * P[m]
    return CheckReport("supermultiplicativity_exact",
                       {"family": "txz", "k": k, "d": d, "n": n, "m": m, "p": str(p), "fiber_window": fiber_window},
                       lhs, rhs, 0.0, PASS if lhs >= rhs else FAIL, "exact rational arithmetic on truncated slabs")


def check_supermultiplicativity_mc(g, p, n, m, samples, opts=None, nsigma=3.0, **kw):
    opts = _opts(opts, kw)
    A = estimate_P(g, p, n + m + 1, samples, _block(opts, 0, samples))
    B = estimate_P(g, p, n, samples, _block(opts, 1, samples))
    C = estimate_P(g, p, m, samples, _block(opts, 2, samples))
    rhs = p * B.value * C.value
    rse = p * math.hypot(B.stderr * C.value, C.stderr * B.value)
    sig = math.hypot(A.stderr, rse)
    v = INCONCLUSIVE if samples < MIN_SAMPLES else _ge(A.value, rhs, sig, nsigma)
    return CheckReport("supermultiplicativity", _gparams(g, p=p, n=n, m=m, samples=samples, seed=opts.seed),
                       A.value, rhs, sig, v)


def check_theta_power(g, p, theta, n, samples, opts=None, nsigma=3.0, **kw):
    """P_{p^theta}(n) >= P_p(n)^theta for theta in (0, 1]."""
    opts = _opts(opts, kw)
    A = estimate_P(g, p ** theta, n, samples, _block(opts, 0, samples))
    B = estimate_P(g, p, n, samples, _block(opts, 1, samples))
    rhs = B.value ** theta
    rse = theta * B.value ** (theta - 1) * B.stderr if B.value > 0 else 0.0
    sig = math.hypot(A.stderr, rse)
    v = INCONCLUSIVE if samples < MIN_SAMPLES else _ge(A.value, rhs, sig, nsigma)
    return CheckReport("theta_power", _gparams(g, p=p, theta=theta, n=n, samples=samples), A.value, rhs, sig, v)


def check_Q_recursion(g, p, n, samples, opts=None, nsigma=3.0, **kw):
    """Q_p(n+1) >= p Q_p(n)."""
    opts = _opts(opts, kw)
    A = estimate_Q(g, p, n + 1, samples, _block(opts, 0, samples))
    B = estimate_Q(g, p, n, samples, _block(opts, 1, samples))
    sig = math.hypot(A.stderr, p * B.stderr)
    v = INCONCLUSIVE if samples < MIN_SAMPLES else _ge(A.value, p * B.value, sig, nsigma)
    return CheckReport("Q_recursion", _gparams(g, p=p, n=n, samples=samples), A.value, p * B.value, sig, v)


# ---------------------------------------------------------------- oracle gate

GATE_INSTANCES = [
    # (family, k, d, n, fiber_window, target, first_visit)
    ("tree", 3, 0, 1, None, "fiber", False),
    ("tree", 3, 0, 3, None, "fiber", False),
    ("tree", 4, 0, 2, None, "fiber", False),
    ("txz", 3, 1, 1, 1, "fiber", False),
    ("txz", 3, 1, 1, 2, "fiber", False),
    ("txz", 3, 1, 1, 2, "site", False),
    ("txz", 4, 1, 1, 1, "fiber", False),
    ("txz", 3, 1, 2, 1, "site", True),
    ("txz", 3, 1, 2, 1, "fiber", True),
    ("ll", 3, 0, 1, None, "fiber", False),
    ("ll", 3, 0, 1, None, "site", False),
    ("ll", 3, 0, 1, None, "site", True),
]


def gate_instance(spec):
    fam, k, d, n, w, target, fv = spec
    g = GraphSpec(fam, k, d)
    return g, oracle.truncated_slab_instance(g, n, w, target=target, first_visit=fv)


def check_oracle_instance(spec, p, samples, opts=None, nsigma=3.0, **kw):
    """Monte Carlo connectivity on a truncated slab against the exact solver."""
    opts = _opts(opts, kw)
    g, inst = gate_instance(spec)
    fam, k, d, n, w, target, fv = spec
    exact = float(oracle.exact_connectivity_small(inst, Fraction(p)))
    t = target_tree(g, n)
    res = explore_batch(g, p, (-n, 0), samples, seed=opts.seed, replica0=opts.replica0, targets=[t],
                        first_visit_stop=fv, fiber_window=w, budget=opts.budget, workers=opts.workers)
    ind = (res.hits[:, 0] > 0) if target == "fiber" else res.exact[:, 0].astype(bool)
    est = float(ind.mean())
    sig = math.sqrt(exact * (1 - exact) / samples)
    prm = {"family": fam, "k": k, "d": d, "n": n, "fiber_window": w, "target": target, "first_visit": fv,
           "edges": inst.n_edges, "p": p, "samples": samples, "seed": opts.seed}
    v = INCONCLUSIVE if samples < MIN_SAMPLES else (PASS if abs(est - exact) <= nsigma * sig else FAIL)
    return CheckReport("oracle_gate", prm, est, exact, sig, v, "sigma from the exact Bernoulli variance")


# ---------------------------------------------------------------- tree closed forms, zero tolerance

def tree_exact_suite(p=0.3, k=3, cap=40, m_max=8):
    """Every check with a tree closed form, evaluated with the closed forms and no slack."""
    out = check_mtp_tree_exact(Fraction(p), k, [(1, 0, 1), (2, 0, 2), (1, -2, 3), (2, -1, 4)])
    prm = {"family": "tree", "k": k, "p": p, "height_cap": cap}
    a = p * math.sqrt(k - 1)
    chi_half = oracle.tree_chi_tilted(p, k, 0.5, cap)
    if a < 1:
        S = sum(float(k - 1) ** (-n / 2) * oracle.tree_D(p, k, n) for n in range(cap + 1))
        # the tree fiber is the single site o
        rhs = math.exp(2 * S)
        out.append(CheckReport("hammersley_welsh_tree", prm, chi_half, rhs, 0.0,
                               PASS if chi_half <= rhs else FAIL, "closed forms"))
    for lam in (0.5, 0.3):
        lhs = oracle.tree_chi_tilted(p, k, lam, cap)
        rhs = oracle.tree_H(p, k, lam, cap) * oracle.tree_H(p, k, 1 - lam, cap)
        out.append(CheckReport("series_product_tree", {**prm, "lam": lam}, lhs, rhs, 0.0,
                               PASS if lhs <= rhs else FAIL, "closed forms"))
    # backscattering has no tree analogue; point-to-fiber rate from exact p^m
    ms = list(range(2, m_max + 1, 2))
    ys = [-math.log(oracle.tree_path_probability(p, m)) for m in ms]
    rate = float(np.polyfit(ms, ys, 1)[0])
    half = 0.5 * math.log(k - 1)
    out.append(CheckReport("point_to_fiber_rate_tree", {**prm, "exact_rate": -math.log(p)}, rate, half, 0.0,
                           PASS if (abs(rate + math.log(p)) < 1e-12 and (rate >= half) == (-math.log(p) >= half))
                           else FAIL, "rate equals -log p exactly"))
    for n in (1, 2, 3):
        lhs = Fraction(p) ** (2 * n + 1)
        rhs = Fraction(p) * Fraction(p) ** n * Fraction(p) ** n
        out.append(CheckReport("supermultiplicativity_tree", {**prm, "n": n, "m": n}, lhs, rhs, 0.0,
                               PASS if lhs >= rhs else FAIL, "equality on the tree"))
    return out
