"""Monte Carlo vs exact connection probabilities on the small gate instances.

    python scripts/oracle_gate.py --samples 100000
"""
import argparse

from percolab.inequalities import GATE_INSTANCES, check_oracle_instance


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--samples", type=int, default=10**5)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    worst = 0.0
    for spec in GATE_INSTANCES:
        r = check_oracle_instance(spec, a.p, a.samples, seed=a.seed)
        z = abs(r.lhs - r.rhs) / r.sigma if r.sigma > 0 else 0.0
        worst = max(worst, z)
        print(f"{r.verdict:5s} mc={r.lhs:.6f} exact={r.rhs:.6f} z={z:.2f}  {r.params}")
    print(f"max |z| = {worst:.2f}")


if __name__ == "__main__":
    main()
