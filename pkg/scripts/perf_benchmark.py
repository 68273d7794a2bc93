"""Throughput of the batch explorer for depth-n slabs on T x Z.

    python scripts/perf_benchmark.py --samples 1000000 --depth 6
"""
import argparse
import os
import time

from percolab.estimators import target_tree
from percolab.graph import GraphSpec
from percolab.sampler import explore_batch


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--family", default="txz")
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--p", type=float, default=0.2)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--samples", type=int, default=10**6)
    ap.add_argument("--workers", type=int, default=None)
    a = ap.parse_args()
    g = GraphSpec(a.family, a.k, a.d if a.family == "txz" else 0)
    t = [target_tree(g, a.depth)]
    explore_batch(g, a.p, (-a.depth, 0), 100, seed=0, targets=t, workers=a.workers)  # jit warmup
    t0 = time.time()
    res = explore_batch(g, a.p, (-a.depth, 0), a.samples, seed=0, targets=t, workers=a.workers)
    dt = time.time() - t0
    print(f"{a.samples} explorations in {dt:.2f} s ({a.samples / dt:.0f}/s) on {os.cpu_count()} core(s); "
          f"mean sites {res.n_visited.mean():.2f}, censored {res.censored.mean():.2e}")


if __name__ == "__main__":
    main()
