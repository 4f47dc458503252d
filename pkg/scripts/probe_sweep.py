"""Existence-probe sweep over [3,4,p]: best and median residual per p.

    python3 scripts/probe_sweep.py --ps 4,5,6,7 --restarts 200 --seed 1
"""
import argparse
import json
import time

import numpy as np

from orthomult.explorer import NONEXISTENCE_FLOOR, ProbeConfig, existence_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ps", default="4,5,6,7,8")
    ap.add_argument("--restarts", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--json", default=None, help="also write the rows to this file")
    args = ap.parse_args()

    rows = []
    print(f"{'p':>3} {'best':>10} {'median':>10} {'feasible':>9} {'seconds':>8}")
    for p in (int(x) for x in args.ps.split(",")):
        t0 = time.perf_counter()
        res = existence_probe(ProbeConfig(3, 4, p, restarts=args.restarts, seed=args.seed))
        dt = time.perf_counter() - t0
        row = dict(p=p, best=res.best_residual, median=float(np.median(res.per_restart)),
                   feasible=res.feasible, above_floor=res.best_residual >= NONEXISTENCE_FLOOR, seconds=dt)
        rows.append(row)
        print(f"{p:>3} {row['best']:>10.3e} {row['median']:>10.3e} {str(row['feasible']):>9} {dt:>8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
