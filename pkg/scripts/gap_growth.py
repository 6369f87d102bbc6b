#!/usr/bin/env python3
"""Pricing optimum against the adaptive mechanism on the equal-revenue gap instance."""

import math

from pricer.lottery import GAP_MAX_N, evaluate_adaptive, make_gap_instance
from pricer.solver import solve_optimal


def main():
    print(f"{'n':>3} {'pricing':>9} {'ln n+1.1':>9} {'adaptive':>9} {'0.3 n':>6}")
    for n in range(2, GAP_MAX_N + 1):
        g = make_gap_instance(n)
        pricing = solve_optimal(g.dist, g.horizon).revenue
        adaptive = evaluate_adaptive(g.mechanism, g.dist).revenue
        print(f"{n:3d} {pricing:9.4f} {math.log(n) + 1.1:9.4f} {adaptive:9.4f} {0.3 * n:6.2f}")


if __name__ == "__main__":
    main()
