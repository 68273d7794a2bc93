"""Command-line entry point: ``percolab {estimate,sweep,verify}``.

Configuration may come from a JSON file (``--config``) whose keys are the
long flag names with dashes or underscores; flags given on the command line
override it.  The seed falls back to ``PERCOLAB_SEED`` and then 0.

Exit codes: 0 ok, 1 usage error, 2 a verification check failed.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import inequalities as ineq
from .dimension import dimension_estimate
from .estimators import (RunOpts, beta_star_record, estimate_beta_star, estimate_chi, estimate_D_U, estimate_E,
                         estimate_fiber_tail, estimate_P, estimate_point_to_fiber, estimate_Q, estimate_X)
from .graph import GraphSpec, MalformedInputError
from .records import to_csv, to_json
from .sampler import DEFAULT_BUDGET, DEFAULT_HEIGHT_CAP

QUANTITIES = ["P", "E", "Q", "X", "chi", "D", "U", "beta_star", "fiber_tail", "point_to_fiber", "dimension"]
SUITES = ["tree-exact", "mtp", "backscattering", "hw", "p2f", "supermult", "oracle", "all"]
# quantities whose per-replica outcome is non-decreasing in p under shared seeds
MONOTONE = {"P", "E", "Q", "X", "chi", "D", "U", "point_to_fiber"}

DEFAULTS = dict(family="tree", k=3, d=0, p=None, p_grid=None, n=None, lam=0.5, window=None, samples=10**4,
                budget=DEFAULT_BUDGET, height_cap=DEFAULT_HEIGHT_CAP, seed=None, workers=None, coupled=True,
                out=None, format="csv", quantity=None, suite="all", nsigma=3.0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _add_common(sp):
    sp.add_argument("--config", help="JSON config file; flags override its values")
    sp.add_argument("--family", choices=["tree", "txz", "ll"])
    sp.add_argument("--k", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--budget", type=int)
    sp.add_argument("--height-cap", type=int, dest="height_cap")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=["csv", "json"])


def build_parser():
    ap = _Parser(prog="percolab", description="Percolation on slabs of nonunimodular transitive graphs.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    for name in ("estimate", "sweep"):
        sp = sub.add_parser(name)
        _add_common(sp)
        sp.add_argument("--quantity", choices=QUANTITIES)
        sp.add_argument("--n", type=int, help="depth, level l (X), distance m (point_to_fiber) or n_max")
        sp.add_argument("--lambda", type=float, dest="lam")
        sp.add_argument("--window", help="a:b slab window for X (default: +-height cap)")
        if name == "sweep":
            sp.add_argument("--p-grid", dest="p_grid", help="a:b:step, inclusive")
            sp.add_argument("--coupled", type=_bool, help="share the seed across p (default true)")
    sp = sub.add_parser("verify")
    _add_common(sp)
    sp.add_argument("--suite", choices=SUITES)
    sp.add_argument("--nsigma", type=float)
    return ap


def resolve(args):
    """Merge defaults, the config file and explicit flags (in increasing priority)."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        for key, val in data.items():
            key = key.replace("-", "_")
            key = "lam" if key == "lambda" else key
            if key not in cfg:
                raise UsageError(f"unknown config key {key!r}")
            cfg[key] = val
    for key, val in vars(args).items():
        if key in cfg and val is not None:
            cfg[key] = val
    if cfg["seed"] is None:
        env = os.environ.get("PERCOLAB_SEED")
        try:
            cfg["seed"] = int(env) if env else 0
        except ValueError:
            raise UsageError(f"PERCOLAB_SEED is not an integer: {env!r}")
    cfg["coupled"] = _bool(cfg["coupled"])
    if cfg["samples"] is None or int(cfg["samples"]) < 1:
        raise UsageError("samples must be >= 1")
    if cfg["family"] != "txz" and cfg["d"]:
        cfg["d"] = 0
    if cfg["family"] == "txz" and not cfg["d"]:
        cfg["d"] = 1
    return cfg


def parse_grid(text):
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except (ValueError, AttributeError):
        raise UsageError(f"p-grid must be a:b:step, got {text!r}")
    if step <= 0 or b < a:
        raise UsageError("p-grid is empty")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    grid = [round(a + i * step, 12) for i in range(count)]
    if not grid or any(not 0 <= x <= 1 for x in grid):
        raise UsageError("p-grid values must lie in [0, 1]")
    return grid


def _window(cfg):
    if cfg["window"] is None:
        return None, None
    try:
        a, b = (int(x) for x in str(cfg["window"]).split(":"))
    except ValueError:
        raise UsageError(f"window must be a:b, got {cfg['window']!r}")
    return a, b


def _need(cfg, key):
    if cfg[key] is None:
        raise UsageError(f"--{key.replace('_', '-')} is required for quantity {cfg['quantity']}")
    return cfg[key]


def run_quantity(cfg, g, p, opts):
    """Records for one quantity at one p."""
    q, s = cfg["quantity"], int(cfg["samples"])
    if q == "P":
        return [estimate_P(g, p, _need(cfg, "n"), s, opts)]
    if q == "E":
        return [estimate_E(g, p, _need(cfg, "n"), s, opts)]
    if q == "Q":
        return [estimate_Q(g, p, _need(cfg, "n"), s, opts)]
    if q == "X":
        a, b = _window(cfg)
        return [estimate_X(g, p, _need(cfg, "n"), a, b, s, opts)]
    if q == "chi":
        return [estimate_chi(g, p, cfg["lam"], opts.height_cap, s, opts)]
    if q in ("D", "U"):
        D, U_mtp, U_direct = estimate_D_U(g, p, _need(cfg, "n"), s, opts)
        return [D] if q == "D" else [U_mtp, U_direct]
    if q == "beta_star":
        series = estimate_beta_star(g, p, _need(cfg, "n"), s, opts)
        return series.records + [beta_star_record(series, g, p, opts)]
    if q == "fiber_tail":
        return estimate_fiber_tail(g, p, s, opts).to_records(g, p, opts)
    if q == "point_to_fiber":
        return [estimate_point_to_fiber(g, p, _need(cfg, "n"), s, opts)]
    if q == "dimension":
        rec, _ = dimension_estimate(g, p, _need(cfg, "n"), s, opts)
        return [rec]
    raise UsageError(f"unknown quantity {q!r}")


def _graph(cfg):
    return GraphSpec(cfg["family"], int(cfg["k"]), int(cfg["d"]))


def _opts(cfg, seed=None):
    return RunOpts(seed=cfg["seed"] if seed is None else seed, budget=int(cfg["budget"]),
                   height_cap=int(cfg["height_cap"]), workers=cfg["workers"])


def _emit(text, cfg):
    if cfg["out"]:
        with open(cfg["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render(records, cfg):
    return to_csv(records) if cfg["format"] == "csv" else to_json(records) + "\n"


def cmd_estimate(cfg):
    if not cfg["quantity"]:
        raise UsageError("--quantity is required")
    if cfg["p"] is None:
        raise UsageError("--p is required")
    recs = run_quantity(cfg, _graph(cfg), float(cfg["p"]), _opts(cfg))
    _emit(_render(recs, cfg), cfg)
    return 0


def cmd_sweep(cfg):
    if not cfg["quantity"]:
        raise UsageError("--quantity is required")
    if cfg["p_grid"] is None:
        raise UsageError("--p-grid is required")
    grid = parse_grid(cfg["p_grid"])
    g = _graph(cfg)
    recs = []
    for i, p in enumerate(grid):
        # uncoupled runs use well separated seeds per grid point
        seed = cfg["seed"] if cfg["coupled"] else cfg["seed"] + 7919 * (i + 1)
        recs.extend(run_quantity(cfg, g, p, _opts(cfg, seed)))
    _emit(_render(recs, cfg), cfg)
    return 0


def verify_reports(cfg):
    suite = cfg["suite"]
    s = int(cfg["samples"])
    ns = float(cfg["nsigma"])
    k = int(cfg["k"])
    opts = _opts(cfg)
    ps = lambda default: [float(cfg["p"])] if cfg["p"] is not None else default
    want = lambda name: suite in (name, "all")
    out = []
    if want("tree-exact"):
        for p in ps([0.1, 0.2, 0.3]):
            out += ineq.tree_exact_suite(p, k)
    if want("mtp"):
        cases = [(1, -1, 2), (2, -1, 3)]
        for fam in ("tree", "txz", "ll"):
            g = GraphSpec(fam, k, 1 if fam == "txz" else 0)
            for p in ps([0.1, 0.2]):
                out += ineq.check_mtp(g, p, cases, s, opts, ns)
        for p in ps([0.1, 0.2]):
            out += ineq.check_mtp_tree_exact(p, k, cases)
    if want("backscattering"):
        for p in ps([0.15, 0.25]):
            for n in (0, 1, 2):
                out.append(ineq.check_backscattering_LL(p, n, k, s, opts, ns))
    if want("hw"):
        for fam in ("txz", "ll"):
            g = GraphSpec(fam, k, 1 if fam == "txz" else 0)
            for p in ps([0.1, 0.2]):
                out.append(ineq.check_hammersley_welsh(g, p, 8, 16, s, opts, ns))
                out.append(ineq.check_series_product(g, p, 0.5, 16, s, opts, ns))
    if want("p2f"):
        tree = GraphSpec("tree", k)
        p = ps([0.6])[0]
        out.append(ineq.check_point_to_fiber_rate(tree, p, 8, s, RunOpts(**{**opts.__dict__, "height_cap": 4}),
                                                  ns, expected=-math.log(p) if p > 0 else None))
        out.append(ineq.check_point_to_fiber_rate(GraphSpec("txz", k, 1), ps([0.15])[0], 8, s, opts, ns))
    if want("supermult"):
        for n in (1, 2):
            for m in (1, 2):
                out.append(ineq.check_supermultiplicativity_exact(n, m, "1/5"))
        g = GraphSpec("txz", k, 1)
        for p in ps([0.2]):
            for n in (1, 2):
                for m in (1, 2):
                    out.append(ineq.check_supermultiplicativity_mc(g, p, n, m, s, opts, ns))
    if want("oracle"):
        for spec in ineq.GATE_INSTANCES:
            out.append(ineq.check_oracle_instance(spec, ps([0.3])[0], s, opts, ns))
    return out


def cmd_verify(cfg):
    reports = verify_reports(cfg)
    _emit(ineq.reports_to_json(reports) + "\n", cfg)
    counts = {v: sum(r.verdict == v for r in reports) for v in (ineq.PASS, ineq.FAIL, ineq.INCONCLUSIVE)}
    print(f"verify: {counts['pass']} pass, {counts['fail']} fail, {counts['inconclusive']} inconclusive",
          file=sys.stderr)
    return 2 if counts["fail"] else 0


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required: estimate, sweep or verify")
        cfg = resolve(args)
        print(f"seed={cfg['seed']}", file=sys.stderr)
        return {"estimate": cmd_estimate, "sweep": cmd_sweep, "verify": cmd_verify}[args.command](cfg)
    except (UsageError, MalformedInputError) as exc:
        print(f"percolab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
