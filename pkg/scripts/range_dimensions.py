"""Range dimension and singular-value gap of the constructed example families."""
import argparse

import numpy as np

from orthomult.hurwitz import range_dimension, singular_values
from orthomult.moduli import (
    AnomalousPoint,
    GrandPoint,
    T248Point,
    T347Point,
    anomalous_construct,
    ellipse_points,
    extension_construct,
    extension_solve,
    grand_construct,
    quaternion_construct,
    t248_construct,
    t347_construct,
)
from orthomult.explorer import sample


def examples(seed):
    yield "quaternion", quaternion_construct()
    yield "t347 nu=0.5", t347_construct(T347Point(0.5))
    yield "t248 (0.3,-0.2)", t248_construct(T248Point(0.3, -0.2))
    yield "grand", grand_construct(GrandPoint(0.3, 0.2, 0.1, 0.05, 0.05))
    yield "anomalous", anomalous_construct(AnomalousPoint(0.7, 0.4, 1.1, np.pi - 2.2))
    for k, P in enumerate(ellipse_points(0.05, 0.03)):
        yield f"three flat angles #{k}", extension_construct(P)
    yield "two flat angles", extension_construct(extension_solve("N2", alpha=0.5, nu=0.6))
    yield "one flat angle", extension_construct(extension_solve("N1", alpha=0.9, eps=-1.02))
    for k, (_, H) in enumerate(sample("Extension", 3, seed=seed)):
        yield f"generic extension #{k}", H


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rank-tol", type=float, default=1e-7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'example':>24} {'m,n,p':>7} {'rank':>5} {'gap':>10}")
    for name, H in examples(args.seed):
        s = singular_values(H)
        r = range_dimension(H, args.rank_tol)
        gap = s[r - 1] - (s[r] if r < len(s) else 0.0)
        print(f"{name:>24} {H.m},{H.n},{H.p:<3} {r:>5} {gap:>10.3e}")


if __name__ == "__main__":
    main()
