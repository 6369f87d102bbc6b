"""Discrete value distributions and quantile discretization.

A :class:`ValueDistribution` is a finite support ``v_1 < ... < v_n`` with
positive masses. Continuous distributions enter through a
:class:`QuantileOracle` and are sandwiched between two uniform discrete
distributions by :func:`discretize`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

MASS_TOL = 1e-9


class InvalidDistribution(ValueError):
    pass


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ValueDistribution:
    """Finite support with probability masses.

    Masses are renormalized to sum to exactly one on construction.
    """

    values: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        masses = np.asarray(self.masses, dtype=np.float64).ravel()
        if values.size == 0:
            raise InvalidDistribution("empty support")
        if values.size != masses.size:
            raise InvalidDistribution(
                f"{values.size} values but {masses.size} masses")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidDistribution("values must be finite and >= 0")
        if np.any(np.diff(values) <= 0):
            raise InvalidDistribution("values must be strictly increasing")
        if not np.all(np.isfinite(masses)) or np.any(masses <= 0):
            raise InvalidDistribution("masses must be positive")
        total = math.fsum(masses)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidDistribution(f"masses sum to {total!r}, not 1")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "masses", _frozen(masses / total))

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def max_value(self) -> float:
        return float(self.values[-1])

    @property
    def log_range(self) -> float:
        """``ln(v_n / v_1)``; infinite when ``v_1 = 0``."""
        if self.values[0] == 0:
            return math.inf
        return math.log(self.values[-1] / self.values[0])

    def cdf(self, x: float) -> float:
        return math.fsum(self.masses[self.values <= x])

    def __eq__(self, other):
        if not isinstance(other, ValueDistribution):
            return NotImplemented
        return (np.array_equal(self.values, other.values)
                and np.array_equal(self.masses, other.masses))

    def __repr__(self):
        return f"ValueDistribution(values={self.values.tolist()}, masses={self.masses.tolist()})"

    def to_json(self) -> dict:
        return {"values": self.values.tolist(), "masses": self.masses.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "ValueDistribution":
        try:
            return validate(obj["values"], obj["masses"])
        except KeyError as exc:
            raise InvalidDistribution(f"missing key {exc}") from None


def validate(values: Sequence[float], masses: Sequence[float]) -> ValueDistribution:
    return ValueDistribution(values, masses)


def uniform_over(values: Sequence[float]) -> ValueDistribution:
    n = len(values)
    return ValueDistribution(values, np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class SuffixView:
    """Values ``v_start..v_n`` with their original (unnormalized) masses."""

    values: np.ndarray
    masses: np.ndarray
    start: int
    excluded_mass: float

    @property
    def n(self) -> int:
        return int(self.values.size)


def suffix(dist: ValueDistribution, i: int) -> SuffixView:
    """Participating view starting at support index ``i`` (0-based)."""
    if not 0 <= i < dist.n:
        raise IndexError(f"suffix index {i} out of range for n={dist.n}")
    vals = dist.values[i:]
    ms = dist.masses[i:]
    return SuffixView(vals, ms, i, math.fsum(dist.masses[:i]))


def welfare(dist) -> float:
    return math.fsum(np.asarray(dist.values) * np.asarray(dist.masses))


def myerson_price(dist: ValueDistribution) -> tuple[float, float]:
    """Best single posted price among support points; ties go to the lower price."""
    tail = np.cumsum(dist.masses[::-1])[::-1]
    revs = dist.values * tail
    best = 0
    for j in range(1, dist.n):
        if revs[j] > revs[best] * (1 + 1e-12):
            best = j
    return float(dist.values[best]), float(revs[best])


def dominates(a: ValueDistribution, b: ValueDistribution, tol: float = MASS_TOL) -> bool:
    """First-order stochastic dominance of ``a`` over ``b``."""
    grid = np.union1d(a.values, b.values)
    cdf_a = np.cumsum(a.masses)[np.searchsorted(a.values, grid, side="right") - 1]
    cdf_a = np.where(grid < a.values[0], 0.0, cdf_a)
    cdf_b = np.cumsum(b.masses)[np.searchsorted(b.values, grid, side="right") - 1]
    cdf_b = np.where(grid < b.values[0], 0.0, cdf_b)
    return bool(np.all(cdf_a <= cdf_b + tol))


# ---------------------------------------------------------------------------
# quantile discretization


@dataclass(frozen=True)
class QuantileOracle:
    inverse_cdf: Callable[[float], float]
    upper_bound: float
    name: str = "custom"

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "QuantileOracle":
        if not hi >= lo:
            raise InvalidDistribution("uniform needs lo <= hi")
        return cls(lambda q: lo + (hi - lo) * q, hi, "uniform")

    @classmethod
    def exponential(cls, rate: float, truncate: float) -> "QuantileOracle":
        """Exponential(rate) conditioned on ``[0, truncate]``."""
        if rate <= 0 or truncate <= 0:
            raise InvalidDistribution("exponential needs rate > 0 and truncate > 0")
        z = -math.expm1(-rate * truncate)

        def inv(q):
            if q >= 1.0:
                return truncate
            return min(truncate, -math.log1p(-q * z) / rate)

        return cls(inv, truncate, "exponential")

    @classmethod
    def point(cls, value: float) -> "QuantileOracle":
        return cls(lambda q: value, value, "point")

    @classmethod
    def from_distribution(cls, dist: ValueDistribution) -> "QuantileOracle":
        """Generalized inverse ``inf{v : F(v) >= q}``; ``q = 0`` maps to ``v_1``."""
        cum = np.cumsum(dist.masses)
        cum[-1] = 1.0
        values = dist.values

        def inv(q):
            j = int(np.searchsorted(cum, q - 1e-12, side="left"))
            return float(values[min(j, values.size - 1)])

        return cls(inv, float(values[-1]), "discrete")

    @classmethod
    def from_json(cls, obj: dict) -> "QuantileOracle":
        family = obj.get("family")
        try:
            if family == "uniform":
                return cls.uniform(float(obj.get("lo", 0.0)), float(obj.get("hi", 1.0)))
            if family == "exponential":
                return cls.exponential(float(obj["rate"]), float(obj["truncate"]))
            if family == "point":
                return cls.point(float(obj["value"]))
        except KeyError as exc:
            raise InvalidDistribution(f"missing key {exc}") from None
        raise InvalidDistribution(f"unknown family {family!r}")


@dataclass(frozen=True)
class DiscretizationPair:
    lower: ValueDistribution
    upper: ValueDistribution
    k: int
    max_value: float


def _merged_uniform(points: np.ndarray, k: int) -> ValueDistribution:
    vals, counts = np.unique(points, return_counts=True)
    return ValueDistribution(vals, counts / k)


def discretize(oracle: QuantileOracle, k: int) -> DiscretizationPair:
    """Lower/upper uniform discretizations at quantiles ``j/k``.

    ``lower`` uses ``j = 0..k-1`` and ``upper`` uses ``j = 1..k``; repeated
    quantile values are merged with aggregated mass.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pts = np.array([oracle.inverse_cdf(j / k) for j in range(k + 1)], dtype=np.float64)
    if np.any(np.diff(pts) < 0):
        raise InvalidDistribution("inverse CDF is decreasing")
    if pts[-1] > oracle.upper_bound * (1 + 1e-12) + 1e-12:
        raise InvalidDistribution("inverse CDF exceeds its upper bound")
    return DiscretizationPair(
        lower=_merged_uniform(pts[:-1], k),
        upper=_merged_uniform(pts[1:], k),
        k=k,
        max_value=float(oracle.upper_bound),
    )
