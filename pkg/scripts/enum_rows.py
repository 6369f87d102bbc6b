#!/usr/bin/env python3
"""Print every (v_min, grouping) row that enumeration visits for values (3, 4, 12), T = ln 2."""

import argparse
import math

from pricer.distribution import uniform_over
from pricer.solver import solve_enum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--values", type=float, nargs="+", default=[3.0, 4.0, 12.0])
    ap.add_argument("-T", "--time-limit", type=float, default=math.log(2.0))
    args = ap.parse_args()
    sol = solve_enum(uniform_over(args.values), args.time_limit)
    print(f"{'v_min':>5}  {'grouping':<14} {'prices':<28} {'revenue':>8}  valid")
    for row in sol.table:
        j = row.to_json()
        prices = ", ".join("inf" if p is None else f"{p:.4g}" for p in j["prices"])
        print(f"{j['v_min_index']:>5}  {str(tuple(j['grouping'])):<14} {prices:<28} "
              f"{j['revenue']:8.4f}  {j['valid']}")
    print(f"selected revenue {sol.revenue:.6g}")


if __name__ == "__main__":
    main()
