#!/usr/bin/env python3
"""Solve discretized U[0, 1] across horizons and compare with the closed form."""

import argparse
import time

import numpy as np

from pricer.distribution import QuantileOracle, discretize
from pricer.solver import solve_optimal, uniform_closed_form


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=2000)
    ap.add_argument("--horizons", type=float, nargs="+", default=[0, 0.5, 1, 2, 4, 6, 10])
    args = ap.parse_args()
    upper = discretize(QuantileOracle.uniform(), args.k).upper
    print(f"{'T':>5} {'revenue':>9} {'closed':>9}   x      y      z      secs")
    for T in args.horizons:
        t0 = time.perf_counter()
        s = solve_optimal(upper, T)
        secs = time.perf_counter() - t0
        u = uniform_closed_form(T)
        v = s.assignment.values
        reps = np.asarray(s.grouping.reps) + s.v_min
        y = v[reps[1]] if reps.size > 1 else float("nan")
        print(f"{T:5g} {s.revenue:9.5f} {u.revenue:9.5f}   "
              f"{v[s.v_min]:.4f} {y:.4f} {v[reps[-1]]:.4f}  {secs:.2f}")


if __name__ == "__main__":
    main()
