"""Lottery menus, single-lottery schedules and adaptive mechanisms.

A lottery ``(x, p)`` allocates with probability ``x`` and charges ``p``
only on allocation. Menus are reduced to one lottery per slot, single
lottery schedules are derandomized into mixtures of pricing curves, and
adaptive mechanisms are evaluated in branch normal form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .curve import Post, PricingCurve, UTILITY_TOL, revenue as curve_revenue, utility_tol
from .distribution import ValueDistribution, welfare

EXHAUSTIVE_MAX = 20


class MechanismError(ValueError):
    pass


def _check_prob(x: float, allow_zero: bool) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0) or (x == 0.0 and not allow_zero):
        raise MechanismError(f"probability {x} outside {'[0, 1]' if allow_zero else '(0, 1]'}")
    return x


@dataclass(frozen=True)
class Lottery:
    t: float
    x: float
    p: float

    def __post_init__(self):
        _check_prob(self.x, allow_zero=False)
        if not self.t >= 0 or not (math.isfinite(self.p) and self.p >= 0):
            raise MechanismError(f"invalid lottery {self}")


# ---------------------------------------------------------------------------
# general menus


@dataclass(frozen=True)
class Menu:
    t: float
    options: tuple[tuple[float, float], ...]

    def __post_init__(self):
        opts = tuple((_check_prob(x, True), float(p)) for x, p in self.options)
        if not self.t >= 0:
            raise MechanismError("menu time must be >= 0")
        if any(not (math.isfinite(p) and p >= 0) for _, p in opts):
            raise MechanismError("menu prices must be finite and >= 0")
        object.__setattr__(self, "options", opts)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class MenuSchedule:
    menus: tuple[Menu, ...]

    def __post_init__(self):
        menus = tuple(self.menus)
        if any(b.t < a.t for a, b in zip(menus, menus[1:])):
            raise MechanismError("menu times must be nondecreasing")
        object.__setattr__(self, "menus", menus)

    def utility(self, v: float) -> float:
        """Buyer's optimal expected discounted utility; skipping is always allowed."""
        u = 0.0
        for menu in reversed(self.menus):
            d = math.exp(-menu.t)
            u = max([u] + [x * d * (v - p) + (1 - x) * u for x, p in menu.options])
        return u

    def to_json(self) -> dict:
        return {"timestamps": [{"t": m.t, "options": [{"x": x, "p": p} for x, p in m.options]}
                               for m in self.menus]}

    @classmethod
    def from_json(cls, obj: dict) -> "MenuSchedule":
        try:
            return cls(tuple(Menu(float(m["t"]), tuple((o["x"], o["p"]) for o in m["options"]))
                             for m in obj["timestamps"]))
        except (KeyError, TypeError) as exc:
            raise MechanismError(f"malformed menu schedule: {exc}") from None


def _hull_options(options) -> list[tuple[float, float]]:
    """Vertices of the lower convex hull of ``(x, x p)`` right of the origin."""
    best: dict[float, float] = {}
    for x, p in options:
        if x > 0 and (x not in best or p < best[x]):
            best[x] = p
    pts = sorted((x, x * best[x]) for x in best)
    hull = [(0.0, 0.0)]
    for q in pts:
        while len(hull) >= 2:
            (ax, ay), (bx, by) = hull[-2], hull[-1]
            # drop b when it is on or above the chord a -> q
            if (by - ay) * (q[0] - ax) >= (q[1] - ay) * (bx - ax):
                hull.pop()
            else:
                break
        hull.append(q)
    return [(x, y / x) for x, y in hull[1:]]


def reduce_menu(menu: Menu) -> list[Lottery]:
    """Single lotteries at ``menu.t`` that reproduce the menu's options.

    Choosing the ``z``-th largest allocation in the menu corresponds to
    attempting lotteries ``z..m`` in order.
    """
    kept = _hull_options(menu.options)[::-1]
    out = []
    for i, (x, p) in enumerate(kept):
        x_next, p_next = kept[i + 1] if i + 1 < len(kept) else (0.0, 0.0)
        # 1 - (1 - x) / (1 - x_next), written without cancellation
        xm = (x - x_next) / (1.0 - x_next)
        pm = (x * p - (1.0 - xm) * x_next * p_next) / xm
        out.append(Lottery(menu.t, min(xm, 1.0), max(pm, 0.0)))
    return out


def reduce_to_single(schedule: MenuSchedule) -> "SingleLotterySchedule":
    return SingleLotterySchedule(tuple(lot for m in schedule.menus for lot in reduce_menu(m)))


# ---------------------------------------------------------------------------
# single-lottery schedules


@dataclass(frozen=True)
class SingleLotterySchedule:
    """Ordered lotteries; entries sharing a time are offered in list order."""

    lotteries: tuple[Lottery, ...]

    def __post_init__(self):
        lots = tuple(q if isinstance(q, Lottery) else Lottery(*q) for q in self.lotteries)
        if any(b.t < a.t for a, b in zip(lots, lots[1:])):
            raise MechanismError("lottery times must be nondecreasing")
        object.__setattr__(self, "lotteries", lots)

    @classmethod
    def from_triples(cls, triples: Sequence[tuple[float, float, float]]) -> "SingleLotterySchedule":
        """From ``(t, x, p)`` triples."""
        return cls(tuple(Lottery(float(t), float(x), float(p)) for t, x, p in triples))

    @classmethod
    def from_curve(cls, curve: PricingCurve) -> "SingleLotterySchedule":
        return cls(tuple(Lottery(q.t, 1.0, q.p) for q in curve.posts))

    def __len__(self):
        return len(self.lotteries)

    @property
    def times(self) -> np.ndarray:
        return np.array([q.t for q in self.lotteries])

    @property
    def probs(self) -> np.ndarray:
        return np.array([q.x for q in self.lotteries])

    @property
    def prices(self) -> np.ndarray:
        return np.array([q.p for q in self.lotteries])

    def to_menus(self) -> MenuSchedule:
        return MenuSchedule(tuple(Menu(q.t, ((q.x, q.p),)) for q in self.lotteries))

    def to_json(self) -> dict:
        return self.to_menus().to_json()

    @classmethod
    def from_json(cls, obj: dict) -> "SingleLotterySchedule":
        menus = MenuSchedule.from_json(obj)
        if any(len(m.options) != 1 for m in menus.menus):
            return reduce_to_single(menus)
        return cls(tuple(Lottery(m.t, *m.options[0]) for m in menus.menus if m.options[0][0] > 0))


@dataclass(frozen=True, eq=False)
class Thresholds:
    """Purchase thresholds ``l_i``; ``inf`` marks a lottery nobody attempts."""

    schedule: SingleLotterySchedule
    levels: np.ndarray

    @property
    def removable(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(np.isinf(self.levels)))

    def attempts(self, v: float) -> np.ndarray:
        return v >= self.levels

    def utility(self, v: float, start: int = 0) -> float:
        """Continuation utility ``u_start(v)``."""
        return _continuation(self.schedule, self.levels, v, start)

    def payment(self, v: float) -> float:
        """Expected undiscounted payment of value ``v``."""
        reach, total = 1.0, 0.0
        for q, lev in zip(self.schedule.lotteries, self.levels):
            if v >= lev:
                total += reach * q.x * q.p
                reach *= 1.0 - q.x
        return total

    def __iter__(self):
        return iter(self.levels.tolist())


def _continuation(schedule, levels, v, start):
    reach, u = 1.0, 0.0
    for q, lev in zip(schedule.lotteries[start:], levels[start:]):
        if v >= lev:
            u += reach * q.x * math.exp(-q.t) * (v - q.p)
            reach *= 1.0 - q.x
    return u


def _slope(schedule, levels, v, start):
    reach, s = 1.0, 0.0
    for q, lev in zip(schedule.lotteries[start:], levels[start:]):
        if v >= lev:
            s += reach * q.x * math.exp(-q.t)
            reach *= 1.0 - q.x
    return s


def thresholds(schedule: SingleLotterySchedule) -> Thresholds:
    """Backward recursion for ``(l_i - p_i) e^{-t_i} = u_{i+1}(l_i)``.

    ``h(v) = (v - p_i) e^{-t_i} - u_{i+1}(v)`` is piecewise linear and
    nondecreasing, so ``l_i`` is its first root at or above ``p_i``,
    found segment by segment between later thresholds.
    """
    k = len(schedule)
    levels = np.full(k, math.inf)
    for i in range(k - 1, -1, -1):
        q = schedule.lotteries[i]
        d = math.exp(-q.t)

        def h(v):
            return (v - q.p) * d - _continuation(schedule, levels, v, i + 1)

        lo = q.p
        h_lo = h(lo)
        if h_lo >= 0:
            levels[i] = lo
            continue
        knots = sorted({lev for lev in levels[i + 1:] if math.isfinite(lev) and lev > lo})
        for b in knots + [math.inf]:
            slope = d - _slope(schedule, levels, lo, i + 1)
            if slope > UTILITY_TOL * d:
                root = lo - h_lo / slope
                if root <= b:
                    levels[i] = root
                    break
            if math.isinf(b):
                break
            lo, h_lo = b, h(b)
            if h_lo >= 0:
                levels[i] = lo
                break
    return Thresholds(schedule, levels)


def revenue_single(schedule: SingleLotterySchedule, dist: ValueDistribution) -> float:
    th = thresholds(schedule)
    return math.fsum(f * th.payment(v) for v, f in zip(dist.values, dist.masses))


def utility_single(schedule: SingleLotterySchedule, v: float) -> float:
    """Optimal utility by direct backward induction, independent of thresholds."""
    return schedule.to_menus().utility(v)


def prune(schedule: SingleLotterySchedule) -> SingleLotterySchedule:
    """Drop lotteries that no value ever attempts."""
    th = thresholds(schedule)
    return SingleLotterySchedule(tuple(q for q, lev in zip(schedule.lotteries, th.levels)
                                       if math.isfinite(lev)))


# ---------------------------------------------------------------------------
# derandomization


@dataclass(frozen=True, eq=False)
class CurveDistribution:
    """Weighted pricing curves; ``inf`` in ``prices`` means no post at that slot."""

    weights: np.ndarray
    prices: np.ndarray
    times: np.ndarray
    horizon: float
    realizations: np.ndarray
    mode: str = "exhaustive"
    samples: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.size and (np.any(w <= 0) or abs(math.fsum(w) - 1.0) > 1e-9):
            raise MechanismError("mixture weights must be positive and sum to 1")

    def __len__(self):
        return int(self.weights.size)

    def curve(self, row: int) -> PricingCurve:
        p = self.prices[row]
        keep = np.isfinite(p)
        return PricingCurve(tuple(Post(float(t), float(x))
                                  for t, x in zip(self.times[keep], p[keep])), self.horizon)

    def __iter__(self) -> Iterator[tuple[float, PricingCurve]]:
        for r in range(len(self)):
            yield float(self.weights[r]), self.curve(r)

    def revenue(self, dist: ValueDistribution) -> tuple[float, float]:
        """Mixture revenue and its standard error (zero when exhaustive)."""
        revs = np.array([curve_revenue(c, dist) for _, c in self])
        mean = math.fsum(self.weights * revs)
        if self.mode == "exhaustive" or len(self) < 2:
            return mean, 0.0
        var = math.fsum(self.weights * (revs - mean) ** 2)
        return mean, math.sqrt(var / max(self.samples - 1, 1))

    def to_json(self) -> list[dict]:
        return [{"weight": w, "curve": c.to_json(),
                 "realization": self.realizations[r].astype(int).tolist()}
                for r, (w, c) in enumerate(self)]


def _derandomized_prices(times, levels, rows) -> np.ndarray:
    """``p'_i`` for every realization row, backward over slots."""
    n_rows, k = rows.shape
    prices = np.full((n_rows, k), np.inf)
    disc = np.exp(-times)
    for i in range(k - 1, -1, -1):
        u_next = np.zeros(n_rows)
        for j in range(i + 1, k):
            with np.errstate(invalid="ignore"):
                cand = disc[j] * (levels[i] - prices[:, j])
            u_next = np.maximum(u_next, np.where(np.isfinite(prices[:, j]), cand, 0.0))
        price = levels[i] - u_next / disc[i]
        prices[:, i] = np.where(rows[:, i], price, np.inf)
    return prices


def derandomize(schedule: SingleLotterySchedule, mode: str = "auto", samples: int = 10000,
                seed: int | None = 0) -> CurveDistribution:
    """Mixture of pricing curves matching the schedule's payments and utilities.

    Lotteries nobody attempts are removed first. ``mode`` is
    ``"exhaustive"`` (all ``2^k`` realizations), ``"montecarlo"`` or
    ``"auto"`` (exhaustive up to ``k = 20``).
    """
    sched = prune(schedule)
    th = thresholds(sched)
    k = len(sched)
    horizon = float(max((q.t for q in schedule.lotteries), default=0.0))
    if mode == "auto":
        mode = "exhaustive" if k <= EXHAUSTIVE_MAX else "montecarlo"
    x = sched.probs
    if mode == "exhaustive":
        if k > EXHAUSTIVE_MAX:
            raise MechanismError(f"exhaustive derandomization needs k <= {EXHAUSTIVE_MAX}, got {k}")
        rows = ((np.arange(1 << k)[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1).astype(bool)
        weights = np.prod(np.where(rows, x, 1.0 - x), axis=1)
        keep = weights > 0
        rows, weights = rows[keep], weights[keep]
        n_samples = 0
    elif mode == "montecarlo":
        if samples < 1:
            raise MechanismError("samples must be >= 1")
        rng = np.random.default_rng(seed)
        draws = rng.random((samples, k)) < x[None, :]
        rows, counts = np.unique(draws, axis=0, return_counts=True)
        weights = counts / samples
        n_samples = samples
    else:
        raise MechanismError(f"unknown mode {mode!r}")
    prices = _derandomized_prices(sched.times, th.levels, rows)
    return CurveDistribution(weights, prices, sched.times, horizon, rows, mode, n_samples)


# ---------------------------------------------------------------------------
# adaptive mechanisms


@dataclass(frozen=True)
class AdaptiveMechanism:
    """Exclusive branches; option ``j`` of a branch needs options ``1..j-1`` first."""

    branches: tuple[tuple[Lottery, ...], ...]

    def __post_init__(self):
        branches = tuple(tuple(q if isinstance(q, Lottery) else Lottery(*q) for q in b)
                         for b in self.branches)
        for b in branches:
            if any(y.t < x.t for x, y in zip(b, b[1:])):
                raise MechanismError("option times must be nondecreasing within a branch")
        object.__setattr__(self, "branches", branches)

    @classmethod
    def from_curve(cls, curve: PricingCurve) -> "AdaptiveMechanism":
        return cls(tuple((Lottery(q.t, 1.0, q.p),) for q in curve.posts))

    def to_json(self) -> dict:
        return {"branches": [{"options": [{"t": q.t, "x": q.x, "p": q.p} for q in b]}
                             for b in self.branches]}

    @classmethod
    def from_json(cls, obj: dict) -> "AdaptiveMechanism":
        try:
            return cls(tuple(tuple(Lottery(float(o["t"]), float(o["x"]), float(o["p"]))
                                   for o in b["options"]) for b in obj["branches"]))
        except (KeyError, TypeError) as exc:
            raise MechanismError(f"malformed adaptive mechanism: {exc}") from None


@dataclass(frozen=True, eq=False)
class AdaptiveReport:
    revenue: float
    payments: np.ndarray
    utilities: np.ndarray
    plans: tuple[tuple[int, int] | None, ...]
    welfare: float
    welfare_ok: bool

    def to_json(self) -> dict:
        return {"revenue": self.revenue, "welfare": self.welfare, "welfare_ok": self.welfare_ok,
                "payments": self.payments.tolist(), "utilities": self.utilities.tolist(),
                "plans": [None if p is None else {"branch": p[0], "options": p[1]}
                          for p in self.plans]}


def _prefix_table(branch, v):
    """Cumulative (utility, payment) after taking the first ``L`` options."""
    reach, u, pay = 1.0, 0.0, 0.0
    out = []
    for q in branch:
        u += reach * q.x * math.exp(-q.t) * (v - q.p)
        pay += reach * q.x * q.p
        reach *= 1.0 - q.x
        out.append((u, pay))
    return out


def evaluate_adaptive(mech: AdaptiveMechanism, dist: ValueDistribution) -> AdaptiveReport:
    """Buyer picks the (branch, prefix) with the best expected utility.

    Abstaining is always possible; among near-optimal plans the one with
    the highest expected payment wins.
    """
    pays, utils, plans = [], [], []
    for v in dist.values:
        tol = utility_tol(v)
        cands = [(0.0, 0.0, None)]
        for b, branch in enumerate(mech.branches):
            for L, (u, pay) in enumerate(_prefix_table(branch, v), start=1):
                cands.append((u, pay, (b, L)))
        best_u = max(c[0] for c in cands)
        u, pay, plan = max((c for c in cands if c[0] >= best_u - tol), key=lambda c: c[1])
        pays.append(pay)
        utils.append(u)
        plans.append(plan)
    pays = np.array(pays)
    rev = math.fsum(pays * dist.masses)
    w = welfare(dist)
    # zero-utility ties may overpay by at most the buyer tolerance
    slack = math.fsum(dist.masses * np.array([utility_tol(v) for v in dist.values]))
    return AdaptiveReport(rev, pays, np.array(utils), tuple(plans), w,
                          rev <= w * (1 + 1e-12) + slack)


def example_adaptive_mechanism() -> AdaptiveMechanism:
    """Three-value mechanism on ``{100, 101, 102}`` with ``T = 2 ln 2``."""
    ln2 = math.log(2.0)
    return AdaptiveMechanism((
        (Lottery(0.0, 1.0, 101.25),),
        (Lottery(math.log(4 / 3), 0.5, 100 + 1 / 3), Lottery(2 * ln2, 1.0, 101.0)),
        (Lottery(2 * ln2, 1.0, 100.0),),
    ))


GAP_MAX_N = 8


@dataclass(frozen=True)
class GapInstance:
    dist: ValueDistribution
    mechanism: AdaptiveMechanism
    horizon: float
    n: int


def make_gap_instance(n: int) -> GapInstance:
    """Discretized equal-revenue instance with ``T = ln n`` and ``M = 10 n``.

    Values ``M^i`` carry mass ``M^-i`` for ``i = 1..n``; the leftover mass
    sits on value 0, which never buys.
    """
    if n < 2:
        raise ValueError("gap instance needs n >= 2")
    if n > GAP_MAX_N:
        raise ValueError(f"gap instance limited to n <= {GAP_MAX_N} in double precision")
    M = 10.0 * n
    T = math.log(n)
    vals = [M ** i for i in range(1, n + 1)]
    masses = [M ** -i for i in range(1, n + 1)]
    dist = ValueDistribution([0.0] + vals, [1.0 - math.fsum(masses)] + masses)
    branches = []
    for i in range(1, n + 1):
        x = 0.5 * i / n
        branches.append((Lottery(0.0, x, M ** (i - 1)), Lottery(T, 0.3 / (1 - x), M ** i)))
    return GapInstance(dist, AdaptiveMechanism(tuple(branches)), T, n)
