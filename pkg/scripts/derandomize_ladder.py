#!/usr/bin/env python3
"""Thresholds and derandomized curves of the three-lottery example schedule."""

import math

from pricer.distribution import uniform_over
from pricer.lottery import SingleLotterySchedule, derandomize, revenue_single, thresholds

LN2 = math.log(2.0)


def main():
    sched = SingleLotterySchedule.from_triples([(0, 0.5, 13), (LN2, 0.5, 7), (2 * LN2, 0.5, 4)])
    print("thresholds", [round(float(x), 9) for x in thresholds(sched).levels])
    mix = derandomize(sched, mode="exhaustive")
    for r in range(len(mix)):
        real = tuple(int(x) for x in mix.realizations[r])
        prices = ["inf" if math.isinf(p) else f"{p:g}" for p in mix.prices[r]]
        print(real, prices, f"weight {mix.weights[r]:g}")
    d = uniform_over([4.0, 8.0, 16.0])
    print(f"mixture revenue {mix.revenue(d)[0]:.12g}, lottery revenue {revenue_single(sched, d):.12g}")


if __name__ == "__main__":
    main()
