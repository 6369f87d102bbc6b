"""Pricing curves and the impatient buyer facing them.

A buyer with value ``v`` who buys at time ``t`` for price ``p`` gets
``(v - p) * exp(-t)``; the seller does not discount.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

TIME_TOL = 1e-9
UTILITY_TOL = 1e-9


def utility_tol(v) -> float:
    """Absolute tie tolerance for a buyer of value ``v``; utilities scale with ``v``."""
    return UTILITY_TOL * max(1.0, abs(float(v)))


@dataclass(frozen=True)
class Post:
    t: float
    p: float


@dataclass(frozen=True)
class PricingCurve:
    posts: tuple[Post, ...]
    horizon: float

    def __post_init__(self):
        posts = tuple(p if isinstance(p, Post) else Post(float(p[0]), float(p[1]))
                      for p in self.posts)
        if not self.horizon >= 0:
            raise ValueError("horizon must be >= 0")
        slack = TIME_TOL * max(1.0, self.horizon)
        for a, b in zip(posts, posts[1:]):
            if b.t < a.t:
                raise ValueError("posts must be sorted by time")
        for post in posts:
            if post.t < -slack or post.t > self.horizon + slack:
                raise ValueError(f"post time {post.t} outside [0, {self.horizon}]")
            if not math.isfinite(post.p):
                raise ValueError("post prices must be finite; omit unsold timestamps")
        object.__setattr__(self, "posts", posts)
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]], horizon: float | None = None):
        posts = tuple(Post(float(t), float(p)) for t, p in pairs)
        if horizon is None:
            horizon = max((q.t for q in posts), default=0.0)
        return cls(posts, horizon)

    @property
    def times(self) -> np.ndarray:
        return np.array([q.t for q in self.posts], dtype=np.float64)

    @property
    def prices(self) -> np.ndarray:
        return np.array([q.p for q in self.posts], dtype=np.float64)

    def __len__(self):
        return len(self.posts)

    def to_json(self) -> dict:
        return {"horizon": self.horizon,
                "posts": [{"t": q.t, "p": q.p} for q in self.posts]}

    @classmethod
    def from_json(cls, obj: dict) -> "PricingCurve":
        posts = [Post(float(q["t"]), float(q["p"])) for q in obj["posts"]]
        return cls(tuple(posts), float(obj["horizon"]))


@dataclass(frozen=True)
class PurchaseDecision:
    choice: int | None
    utility: float
    price: float = 0.0
    time: float | None = None

    @property
    def buys(self) -> bool:
        return self.choice is not None


def _choose(times: np.ndarray, prices: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Index of the chosen post per value, -1 for abstain.

    Posts are assumed sorted by time, so the first near-maximizer is the
    earliest one.
    """
    if times.size == 0:
        return np.full(values.shape, -1, dtype=np.int64)
    util = (values[:, None] - prices[None, :]) * np.exp(-times)[None, :]
    best = util.max(axis=1)
    tol = UTILITY_TOL * np.maximum(1.0, np.abs(values))
    first = np.argmax(util >= (best - tol)[:, None], axis=1)
    return np.where(best >= -tol, first, -1)


def best_response(curve: PricingCurve, v: float) -> PurchaseDecision:
    """Utility-maximizing post for value ``v``.

    Zero-utility purchases are taken and ties go to the earliest post.
    """
    if not curve.posts:
        return PurchaseDecision(None, 0.0)
    j = int(_choose(curve.times, curve.prices, np.array([float(v)]))[0])
    if j < 0:
        return PurchaseDecision(None, 0.0)
    post = curve.posts[j]
    u = (v - post.p) * math.exp(-post.t)
    return PurchaseDecision(j, max(u, 0.0) if u > -utility_tol(v) else u, post.p, post.t)


def choices(curve: PricingCurve, values: Sequence[float]) -> np.ndarray:
    return _choose(curve.times, curve.prices, np.asarray(values, dtype=np.float64))


def payments(curve: PricingCurve, values: Sequence[float]) -> np.ndarray:
    idx = choices(curve, values)
    if curve.posts:
        return np.where(idx >= 0, curve.prices[np.maximum(idx, 0)], 0.0)
    return np.zeros(len(values))


def revenue(curve: PricingCurve, dist) -> float:
    """Expected undiscounted payment ``sum_i f(v_i) * price paid``."""
    return math.fsum(payments(curve, dist.values) * np.asarray(dist.masses))


# ---------------------------------------------------------------------------
# per-value assignments


@dataclass(frozen=True, eq=False)
class Assignment:
    """Price and purchase time per support value; NaN marks non-participants."""

    values: np.ndarray
    prices: np.ndarray
    times: np.ndarray

    @property
    def start(self) -> int:
        part = np.flatnonzero(~np.isnan(self.prices))
        return int(part[0]) if part.size else int(self.values.size)

    @property
    def participants(self) -> np.ndarray:
        return ~np.isnan(self.prices)

    @property
    def span(self) -> float:
        """Purchase time of the lowest participant."""
        i = self.start
        return float(self.times[i]) if i < self.values.size else 0.0

    def to_json(self) -> list[dict]:
        return [{"v": float(v), "p": None if math.isnan(p) else float(p),
                 "t": None if math.isnan(t) else float(t)}
                for v, p, t in zip(self.values, self.prices, self.times)]


def _price_slack(values) -> float:
    return 1e-9 * max(1.0, float(np.max(np.abs(values))))


def times_from_prices(prices: Sequence[float], values: Sequence[float],
                      start: int = 0, check: bool = True) -> Assignment:
    """Shortest schedule supporting ``prices`` for ``values[start:]``.

    Sets ``t(v_n) = 0`` and ``t(v_{i-1}) - t(v_i) = ln((v_i - p_{i-1}) / (v_i - p_i))``.
    With ``check=False`` decreasing prices are allowed, which is how
    invalid candidates are inspected.
    """
    values = np.asarray(values, dtype=np.float64)
    p = np.asarray(prices, dtype=np.float64)
    v = values[start:]
    if p.size != v.size:
        raise ValueError(f"{p.size} prices for {v.size} participating values")
    slack = _price_slack(values)
    if np.any(p > v + slack):
        raise ValueError("price above value")
    p = np.minimum(p, v)
    if check and np.any(np.diff(p) < -slack):
        raise ValueError("prices must be nondecreasing")
    t = np.zeros(v.size)
    for i in range(v.size - 1, 0, -1):
        num, den = v[i] - p[i - 1], v[i] - p[i]
        if p[i - 1] == p[i]:
            step = 0.0
        elif den <= 0:
            raise ValueError("price equal to value above a lower price needs unbounded time")
        else:
            step = math.log(num / den)
        t[i - 1] = t[i] + step
    full_p = np.full(values.size, np.nan)
    full_t = np.full(values.size, np.nan)
    full_p[start:] = p
    full_t[start:] = t
    return Assignment(values, full_p, full_t)


def curve_from_assignment(assignment: Assignment, horizon: float | None = None) -> PricingCurve:
    part = assignment.participants
    p = assignment.prices[part]
    t = assignment.times[part]
    slack = _price_slack(assignment.values)
    if np.any(np.diff(p) < -slack) or np.any(np.diff(t) > TIME_TOL * max(1.0, t.max(initial=0))):
        raise ValueError("assignment violates monotonicity")
    if horizon is None:
        horizon = float(t.max(initial=0.0))
    t = np.clip(t, 0.0, horizon)
    pairs = sorted(set(zip(t.tolist(), p.tolist())), key=lambda q: (q[0], -q[1]))
    return PricingCurve(tuple(Post(a, b) for a, b in pairs), horizon)


@dataclass
class ICReport:
    passed: bool
    worst_violation: float
    monotone: bool
    violations: list[str] = field(default_factory=list)


def verify_ic_ir(assignment: Assignment, horizon: float, tol: float = 1e-8) -> ICReport:
    """Check pairwise IC, IR and ``t in [0, T]`` for every participant.

    Violations are measured in units of ``max(1, v)`` so the tolerance is
    scale free.
    """
    part = assignment.participants
    v = assignment.values[part]
    p = assignment.prices[part]
    t = assignment.times[part]
    report = ICReport(True, 0.0, True)

    def flag(amount, msg):
        report.worst_violation = max(report.worst_violation, amount)
        if amount > tol:
            report.passed = False
            report.violations.append(msg)

    if v.size:
        scale = np.maximum(1.0, np.abs(v))
        own = (v - p) * np.exp(-t)
        other = (v[:, None] - p[None, :]) * np.exp(-t)[None, :]
        gap = ((other - own[:, None]) / scale[:, None]).clip(min=0.0)
        i, j = np.unravel_index(np.argmax(gap), gap.shape)
        flag(float(gap[i, j]), f"IC: v={v[i]:g} prefers the option of v={v[j]:g}")
        ir = float(((p - v) / scale).max())
        flag(max(ir, 0.0), "IR: price above value")
        lo = float((-t).max())
        hi = float((t - horizon).max())
        flag(max(lo, hi, 0.0), "time outside [0, T]")
        if np.any(np.diff(p) < -_price_slack(assignment.values)):
            report.monotone = False
            report.passed = False
            report.violations.append("prices decrease with value")
    out = assignment.values[~part]
    if out.size and v.size:
        best = ((out[:, None] - p[None, :]) * np.exp(-t)[None, :]).max(axis=1)
        flag(float((best / np.maximum(1.0, out)).clip(min=0).max()),
             "non-participant has a profitable option")
    return report


# ---------------------------------------------------------------------------
# discounting


def map_discount_horizon(delta: Callable[[float], float] | Sequence[float],
                         horizon: float | None = None,
                         times: Sequence[float] = (),
                         n_check: int = 257) -> tuple[float, tuple[float, ...]]:
    """Map a decreasing discount function onto exponential discounting.

    ``delta`` is either a callable on ``[0, horizon]`` or a sequence of
    samples on an increasing time grid whose last entry is at the horizon.
    Returns ``(T, mapped times)`` with ``t = -ln delta(t')``; ``times`` are
    only mapped when ``delta`` is callable.
    """
    if callable(delta):
        if horizon is None:
            raise ValueError("horizon required with a callable discount")
        grid = np.linspace(0.0, horizon, n_check)
        samples = np.array([delta(x) for x in grid], dtype=np.float64)
    else:
        samples = np.asarray(delta, dtype=np.float64)
        if samples.size == 0:
            raise ValueError("no discount samples")
    if np.any(samples <= 0) or np.any(samples > 1):
        raise ValueError("discount samples must lie in (0, 1]")
    if np.any(np.diff(samples) > 0):
        raise ValueError("discount function must be nonincreasing")
    T = -math.log(samples[-1])
    mapped = tuple(-math.log(delta(x)) for x in times) if callable(delta) else ()
    return T, mapped


def curve_csv(curve: PricingCurve) -> str:
    rows = ["t,p"] + [f"{q.t:.12g},{q.p:.12g}" for q in curve.posts]
    return "\n".join(rows) + "\n"


def value_price_csv(values: Sequence[float], prices: Sequence[float]) -> str:
    rows = ["v,p"]
    for v, p in zip(values, prices):
        rows.append(f"{v:.12g}," + ("" if p is None or math.isnan(p) else f"{p:.12g}"))
    return "\n".join(rows) + "\n"
