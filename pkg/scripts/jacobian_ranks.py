"""Numerical moduli dimensions: Jacobian rank of parameter -> Gram maps at sampled points."""
import argparse
from collections import Counter

from orthomult.explorer import chart_map, jacobian_rank, sample

COMPONENTS = ("Grand", "Anomalous", "T347", "T248", "Extension")
STEPS = (1e-4, 1e-5, 1e-6)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for comp in COMPONENTS:
        ranks = Counter()
        skipped = 0
        for P, _ in sample(comp, args.points, seed=args.seed):
            if chart_map(comp, P)[2] <= 10 * max(STEPS):
                skipped += 1
                continue
            ranks[tuple(sorted({jacobian_rank(comp, P, step=h) for h in STEPS}))] += 1
        summary = ", ".join(f"ranks {list(k)} x{v}" for k, v in sorted(ranks.items()))
        print(f"{comp:>10}: {summary}  (skipped near boundary: {skipped})")


if __name__ == "__main__":
    main()
