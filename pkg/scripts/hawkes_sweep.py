"""Boundary dimension on the k=3 tree over a p grid, next to the closed form.

    python scripts/hawkes_sweep.py --samples 2000 --depth 10
"""
import argparse
import math

from percolab import oracle
from percolab.dimension import dimension_estimate
from percolab.estimators import estimate_beta_star
from percolab.graph import GraphSpec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--depth", type=int, default=10)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--grid", default="0.6,0.7,0.8,0.9")
    a = ap.parse_args()
    g = GraphSpec("tree", a.k)
    print("p,dim,dim_se,hawkes,beta_star,beta_se,dim_plus_beta")
    for p in [float(x) for x in a.grid.split(",")]:
        if (a.k - 1) * p <= 1:
            print(f"{p},nan,nan,nan,nan,nan,nan  # subcritical, no boundary")
            continue
        rec, _ = dimension_estimate(g, p, a.depth, a.samples, seed=a.seed)
        bs = estimate_beta_star(g, p, a.depth, 10 * a.samples, seed=a.seed + 1).summary
        h = oracle.tree_hawkes_dimension(p, a.k)
        print(f"{p},{rec.value:.5f},{rec.stderr:.5f},{h:.5f},{bs['slope']:.5f},"
              f"{bs['slope_stderr']:.5f},{rec.value + bs['slope']:.5f}")


if __name__ == "__main__":
    main()
