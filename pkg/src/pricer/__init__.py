"""Revenue-optimal pricing curves for a buyer who discounts time as ``e^{-t}``."""

from .curve import (Assignment, PricingCurve, Post, best_response, revenue,
                    times_from_prices, verify_ic_ir)
from .distribution import (DiscretizationPair, InvalidDistribution, QuantileOracle,
                           ValueDistribution, discretize, dominates, uniform_over, welfare)
from .lottery import (AdaptiveMechanism, CurveDistribution, Lottery, Menu, MenuSchedule,
                      SingleLotterySchedule, derandomize, evaluate_adaptive,
                      make_gap_instance, reduce_to_single, revenue_single, thresholds)
from .solver import (Grouping, OptimalSolution, SolverConfig, SolverError, solve_enum,
                     solve_given_vmin, solve_optimal, uniform_closed_form)

__all__ = [
    "Assignment",
    "PricingCurve",
    "Post",
    "best_response",
    "revenue",
    "times_from_prices",
    "verify_ic_ir",
    "DiscretizationPair",
    "InvalidDistribution",
    "QuantileOracle",
    "ValueDistribution",
    "discretize",
    "dominates",
    "uniform_over",
    "welfare",
    "AdaptiveMechanism",
    "CurveDistribution",
    "Lottery",
    "Menu",
    "MenuSchedule",
    "SingleLotterySchedule",
    "derandomize",
    "evaluate_adaptive",
    "make_gap_instance",
    "reduce_to_single",
    "revenue_single",
    "thresholds",
    "Grouping",
    "OptimalSolution",
    "SolverConfig",
    "SolverError",
    "solve_enum",
    "solve_given_vmin",
    "solve_optimal",
    "uniform_closed_form",
]

__version__ = "0.1.0"
