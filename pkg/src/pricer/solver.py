"""Revenue-optimal pricing curves for an impatient buyer.

For a fixed lowest participant and a fixed grouping of the participants
into runs that share one price, the optimal prices are closed-form in a
single Lagrange constant ``c`` and the time span they need grows with
``c``. The polynomial-time solver sweeps ``c`` downward and merges the
adjacent pair of groups whose prices cross first; the warm-up solver
enumerates every grouping.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from . import _kernel
from .curve import (Assignment, PricingCurve, curve_from_assignment,
                    times_from_prices)
from .distribution import SuffixView, ValueDistribution, suffix


class SolverError(RuntimeError):
    """Numeric failure: a bracket could not be found or did not converge."""


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-12
    max_iter: int = 200
    c_lo: float = 1e-12
    c_hi: float = 1e12
    factor: float = 10.0
    monotone_slack: float = 1e-9
    enum_max_n: int = 12

    def __post_init__(self):
        for name in ("rtol", "c_lo", "c_hi", "monotone_slack"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1 or self.factor <= 1 or self.c_lo >= self.c_hi:
            raise ValueError("invalid iteration or bracket settings")


DEFAULT = SolverConfig()


# ---------------------------------------------------------------------------
# groupings


@dataclass(frozen=True)
class Grouping:
    """Partition of ``range(n)`` into contiguous runs, given by run starts."""

    reps: tuple[int, ...]
    n: int

    def __post_init__(self):
        reps = tuple(int(r) for r in self.reps)
        if not reps or reps[0] != 0:
            raise ValueError("first group must start at 0")
        if any(b <= a for a, b in zip(reps, reps[1:])) or reps[-1] >= self.n:
            raise ValueError("group starts must be strictly increasing and < n")
        object.__setattr__(self, "reps", reps)

    @classmethod
    def identity(cls, n: int) -> "Grouping":
        return cls(tuple(range(n)), n)

    @classmethod
    def single(cls, n: int) -> "Grouping":
        return cls((0,), n)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "Grouping":
        """From ``g(i)``, the (0-based) representative of each index."""
        labels = [int(x) for x in labels]
        for i, g in enumerate(labels):
            if g not in (i, labels[i - 1] if i else 0):
                raise ValueError(f"invalid grouping label {g} at {i}")
        return cls(tuple(i for i, g in enumerate(labels) if g == i), len(labels))

    def labels(self, offset: int = 0) -> tuple[int, ...]:
        out = []
        for j, r in enumerate(self.reps):
            end = self.reps[j + 1] if j + 1 < len(self.reps) else self.n
            out.extend([r + offset] * (end - r))
        return tuple(out)

    @property
    def n_groups(self) -> int:
        return len(self.reps)

    def members(self, j: int) -> range:
        end = self.reps[j + 1] if j + 1 < len(self.reps) else self.n
        return range(self.reps[j], end)

    def next_rep(self, k: int) -> int | None:
        j = self.reps.index(k)
        return self.reps[j + 1] if j + 1 < len(self.reps) else None

    def masses(self, masses) -> np.ndarray:
        masses = np.asarray(masses, dtype=np.float64)
        return np.array([math.fsum(masses[list(self.members(j))])
                         for j in range(self.n_groups)])

    def merge(self, k: int) -> "Grouping":
        """Merge the group starting at ``k`` with the one after it."""
        nxt = self.next_rep(k)
        if nxt is None:
            raise ValueError("last group has no successor")
        return Grouping(tuple(r for r in self.reps if r != nxt), self.n)

    def expand(self, rep_values) -> np.ndarray:
        out = np.empty(self.n)
        for j, x in enumerate(rep_values):
            out[list(self.members(j))] = x
        return out


def all_groupings(n: int) -> Iterator[Grouping]:
    """Every contiguous grouping of ``range(n)``, finest first."""
    for mask in range((1 << (n - 1)) - 1, -1, -1):
        reps = (0,) + tuple(i for i in range(1, n) if mask >> (i - 1) & 1)
        yield Grouping(reps, n)


# ---------------------------------------------------------------------------
# closed-form prices and spans


def _arrays(dist_suffix, grouping: Grouping):
    v = np.ascontiguousarray(dist_suffix.values, dtype=np.float64)
    if v.size != grouping.n:
        raise ValueError(f"grouping over {grouping.n} values, suffix has {v.size}")
    gm = grouping.masses(dist_suffix.masses)
    reps = np.array(grouping.reps, dtype=np.int64)
    return v, gm, reps


def group_prices(grouping: Grouping, dist_suffix, c: float) -> np.ndarray:
    """One price per representative at Lagrange constant ``c``.

    The lowest group pays ``v_1``; a middle group starting at ``v_k`` pays
    ``(v_next + v_k - sqrt((v_next - v_k)^2 + 4 (v_next - v_k) / (c f_k))) / 2``
    and the last group pays ``v_k - 1 / (c f_k)``. Monotonicity is not
    enforced here.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    v, gm, reps = _arrays(dist_suffix, grouping)
    return v[reps] - _kernel.group_gaps(v, gm, reps, float(c))


def span(grouping: Grouping, dist_suffix, c: float) -> float:
    """Time span ``t(v_1)`` needed by the prices at ``c``.

    Only group boundaries contribute; within a group the log-ratio is
    exactly zero.
    """
    if grouping.n_groups == 1:
        return 0.0
    if not c > 0:
        raise ValueError("c must be positive")
    v, gm, reps = _arrays(dist_suffix, grouping)
    return float(_kernel.group_span(v, gm, reps, float(c)))


def span_of_prices(values, rep_prices, grouping: Grouping) -> float:
    """Telescoped span for arbitrary representative prices (``inf`` if undefined)."""
    v = np.asarray(values, dtype=np.float64)
    total = 0.0
    for j in range(1, grouping.n_groups):
        k = grouping.reps[j]
        num, den = v[k] - rep_prices[j - 1], v[k] - rep_prices[j]
        if den <= 0 or num <= 0:
            return math.inf
        total += math.log(num / den)
    return total


@dataclass(frozen=True, eq=False)
class GroupSolution:
    grouping: Grouping
    start: int
    values: np.ndarray
    masses: np.ndarray
    rep_prices: np.ndarray
    c: float | None
    span: float
    revenue: float

    @property
    def prices(self) -> np.ndarray:
        return self.grouping.expand(self.rep_prices)

    def is_monotone(self, slack: float = DEFAULT.monotone_slack) -> bool:
        tol = slack * max(1.0, float(np.max(self.values)))
        return bool(np.all(np.diff(self.rep_prices) >= -tol))


def _single_group(dist_suffix, start: int) -> GroupSolution:
    v = np.asarray(dist_suffix.values, dtype=np.float64)
    f = np.asarray(dist_suffix.masses, dtype=np.float64)
    return GroupSolution(Grouping.single(v.size), start, v, f,
                         np.array([v[0]]), None, 0.0, float(v[0]) * math.fsum(f))


def _solution_at(grouping: Grouping, dist_suffix, c: float, start: int) -> GroupSolution:
    v, gm, reps = _arrays(dist_suffix, grouping)
    p = v[reps] - _kernel.group_gaps(v, gm, reps, c)
    return GroupSolution(grouping, start, v, np.asarray(dist_suffix.masses, dtype=np.float64),
                         p, c, float(_kernel.group_span(v, gm, reps, c)),
                         math.fsum(p * gm))


def solve_c_for_span(grouping: Grouping, dist_suffix, T: float,
                     config: SolverConfig = DEFAULT) -> GroupSolution:
    """Prices under ``grouping`` whose span is exactly ``T``.

    A single group needs no time and is returned directly.
    """
    start = getattr(dist_suffix, "start", 0)
    if grouping.n_groups == 1:
        return _single_group(dist_suffix, start)
    v, gm, reps = _arrays(dist_suffix, grouping)
    c, ok = _kernel.solve_c(v, gm, reps, float(T), config.c_lo, config.c_hi,
                            config.rtol, config.max_iter, config.factor)
    if not ok:
        raise SolverError(f"no constant c reaches span {T} for grouping {grouping.reps}")
    return _solution_at(grouping, dist_suffix, c, start)


def _price_gap(grouping, dist_suffix, k, c):
    p = group_prices(grouping, dist_suffix, c)
    j = grouping.reps.index(k)
    return p[j + 1] - p[j]


def c_star(grouping: Grouping, dist_suffix, k: int,
           config: SolverConfig = DEFAULT, method: str = "closed") -> float:
    """Smallest ``c`` at which group ``k`` is priced no higher than the next group.

    Zero for the last group and for pairs that never cross. ``method``
    selects the closed form or a sign-change bisection on ``c``.
    """
    if k not in grouping.reps:
        raise ValueError(f"{k} is not a representative")
    nxt = grouping.next_rep(k)
    if nxt is None:
        return 0.0
    if method == "closed":
        v = np.asarray(dist_suffix.values, dtype=np.float64)
        gm = grouping.masses(dist_suffix.masses)
        j = grouping.reps.index(k)
        after = grouping.next_rep(nxt)
        d2 = -1.0 if after is None else float(v[after] - v[nxt])
        return float(_kernel.crossing_c(k == 0, float(v[nxt] - v[k]), gm[j], gm[j + 1], d2))
    if method != "bisect":
        raise ValueError(f"unknown method {method!r}")
    lo, hi = config.c_lo, config.c_hi
    if _price_gap(grouping, dist_suffix, k, lo) >= 0:
        return 0.0
    while _price_gap(grouping, dist_suffix, k, hi) < 0:
        hi *= config.factor
        if hi > 1e300:
            raise SolverError("c_star bracket exhausted")
    for _ in range(config.max_iter):
        mid = math.sqrt(lo) * math.sqrt(hi)
        if hi <= lo * (1 + config.rtol) or not lo < mid < hi:
            break
        if _price_gap(grouping, dist_suffix, k, mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def t_star(grouping: Grouping, dist_suffix, config: SolverConfig = DEFAULT,
           method: str = "closed") -> float:
    """Shortest horizon at which ``grouping`` yields monotone prices."""
    if grouping.n_groups == 1:
        return 0.0
    c = max(c_star(grouping, dist_suffix, k, config, method) for k in grouping.reps)
    return span(grouping, dist_suffix, c)


# ---------------------------------------------------------------------------
# optimal solutions


@dataclass(frozen=True, eq=False)
class OptimalSolution:
    v_min: int
    assignment: Assignment
    curve: PricingCurve
    revenue: float
    grouping: Grouping
    c: float | None
    horizon: float
    span: float = 0.0
    table: tuple = field(default=(), repr=False)

    @property
    def prices(self) -> np.ndarray:
        return self.assignment.prices

    def to_json(self) -> dict:
        return {
            "v_min": float(self.assignment.values[self.v_min]),
            "v_min_index": self.v_min + 1,
            "revenue": self.revenue,
            "c": self.c,
            "span": self.span,
            "horizon": self.horizon,
            "grouping": [g + 1 for g in self.grouping.labels(self.v_min)],
            "assignment": self.assignment.to_json(),
            "curve": self.curve.to_json(),
        }


def _solve_direct(sv: SuffixView, T: float, config: SolverConfig, cstar_method: str) -> GroupSolution:
    g = Grouping.identity(sv.n)
    while g.n_groups > 1:
        cs = [c_star(g, sv, k, config, cstar_method) for k in g.reps]
        j = int(np.argmax(cs))
        if span(g, sv, cs[j]) <= T:
            break
        g = g.merge(g.reps[j])
    return solve_c_for_span(g, sv, T, config)


def _solve_fast(sv: SuffixView, T: float, config: SolverConfig) -> GroupSolution:
    v = np.ascontiguousarray(sv.values, dtype=np.float64)
    f = np.ascontiguousarray(sv.masses, dtype=np.float64)
    if v.size == 1:
        return _single_group(sv, sv.start)
    step, c, ok = _kernel.solve_suffix(v, f, float(T), config.rtol, config.max_iter, config.factor)
    if not ok:
        raise SolverError(f"span bisection failed for suffix starting at {sv.start}")
    absorbed, _, _ = _kernel.merge_sequence(v, f)
    dead = set(absorbed[:step].tolist())
    g = Grouping(tuple(i for i in range(v.size) if i not in dead), v.size)
    if g.n_groups == 1:
        return _single_group(sv, sv.start)
    return _solution_at(g, sv, float(c), sv.start)


def solve_given_vmin(dist: ValueDistribution, i: int, T: float,
                     config: SolverConfig = DEFAULT, method: str = "fast",
                     cstar_method: str = "closed") -> GroupSolution:
    """Optimal prices when ``v_i`` (0-based) is the lowest participant.

    ``method="direct"`` runs the merge loop literally, recomputing every
    crossing constant and span each round; ``"fast"`` runs the same merges
    through the compiled kernel and binary-searches the stopping round.
    """
    if T < 0:
        raise ValueError("time limit must be >= 0")
    sv = suffix(dist, i)
    if sv.n == 1:
        return _single_group(sv, i)
    if method == "direct":
        return _solve_direct(sv, T, config, cstar_method)
    if method == "fast":
        return _solve_fast(sv, T, config)
    raise ValueError(f"unknown method {method!r}")


def _finish(dist: ValueDistribution, sol: GroupSolution, T: float, table=()) -> OptimalSolution:
    assignment = times_from_prices(sol.prices, dist.values, sol.start)
    horizon = max(float(T), 0.0)
    curve = curve_from_assignment(assignment, horizon)
    return OptimalSolution(sol.start, assignment, curve, sol.revenue, sol.grouping,
                           sol.c, horizon, assignment.span, tuple(table))


def _better(rev: float, best: float | None) -> bool:
    return best is None or rev > best + 1e-12 * max(1.0, abs(best))


def solve_optimal(dist: ValueDistribution, T: float, config: SolverConfig = DEFAULT,
                  method: str = "fast") -> OptimalSolution:
    """Best pricing curve over every choice of lowest participant.

    Suffixes whose total welfare cannot beat the incumbent are skipped;
    ties keep the lowest participant.
    """
    if T < 0:
        raise ValueError("time limit must be >= 0")
    if method == "fast":
        i, _ = _kernel.best_vmin(np.ascontiguousarray(dist.values), np.ascontiguousarray(dist.masses),
                                 float(T), config.rtol, config.max_iter, config.factor)
        if i < 0:
            raise SolverError("span bisection failed")
        return _finish(dist, solve_given_vmin(dist, int(i), T, config, method), T)
    tail_welfare = np.cumsum((dist.values * dist.masses)[::-1])[::-1]
    best = None
    for i in range(dist.n):
        if best is not None and tail_welfare[i] <= best.revenue:
            continue
        sol = solve_given_vmin(dist, i, T, config, method)
        if _better(sol.revenue, None if best is None else best.revenue):
            best = sol
    return _finish(dist, best, T)


@dataclass(frozen=True)
class EnumRow:
    v_min: int
    grouping: tuple[int, ...]
    prices: tuple[float, ...]
    revenue: float
    valid: bool

    def to_json(self) -> dict:
        return {"v_min_index": self.v_min + 1,
                "grouping": [g + 1 for g in self.grouping],
                "prices": [None if math.isinf(p) else p for p in self.prices],
                "revenue": self.revenue, "valid": self.valid}


def solve_enum(dist: ValueDistribution, T: float, config: SolverConfig = DEFAULT,
               shuffle_seed: int | None = None) -> OptimalSolution:
    """Exponential-time reference: try every lowest participant and grouping.

    Groupings whose closed-form prices decrease somewhere are recorded in
    the table but never selected. ``shuffle_seed`` permutes the visiting
    order of groupings.
    """
    if dist.n > config.enum_max_n:
        raise ValueError(f"support of {dist.n} exceeds enumeration cap {config.enum_max_n}")
    if T < 0:
        raise ValueError("time limit must be >= 0")
    rows, best = [], None
    for i in range(dist.n):
        sv = suffix(dist, i)
        groupings = list(all_groupings(sv.n))
        if shuffle_seed is not None:
            random.Random(shuffle_seed + i).shuffle(groupings)
        for g in groupings:
            sol = solve_c_for_span(g, sv, T, config)
            valid = sol.is_monotone(config.monotone_slack)
            full = (math.inf,) * i + tuple(sol.prices.tolist())
            rows.append(EnumRow(i, g.labels(i), full, sol.revenue, valid))
            if valid and _better(sol.revenue, None if best is None else best.revenue):
                best = sol
    return _finish(dist, best, T, rows)


# ---------------------------------------------------------------------------
# independent grid oracle


def _grid(v: float, delta: float) -> np.ndarray:
    g = np.arange(0.0, v, delta)
    return np.append(g[g < v], v)


def _snap_down(bound: np.ndarray, v: float, delta: float) -> np.ndarray:
    """Largest point of ``_grid(v, delta)`` not above ``bound``; ``-inf`` if none."""
    snapped = np.floor(bound / delta + 1e-9) * delta
    snapped = np.where(snapped > bound, snapped - delta, snapped)
    snapped = np.minimum(snapped, np.nextafter(v, 0) if v > 0 else 0.0)
    snapped = np.where(bound >= v, v, snapped)
    return np.where(bound < 0, -np.inf, snapped)


def brute_force_reference(dist: ValueDistribution, T: float, delta: float,
                          chunk: int = 512) -> float:
    """Grid search over nondecreasing price vectors for supports of size <= 3.

    Prices range over ``{0, delta, 2 delta, ..., v_i}``; every suffix of
    participants is tried and the top price is pushed as high as the time
    limit allows. The result is a feasible revenue, hence a lower bound.
    """
    if dist.n > 3:
        raise ValueError("grid oracle supports at most 3 values")
    if not delta > 0:
        raise ValueError("grid resolution must be positive")
    decay = math.exp(-T)
    best = 0.0
    for s in range(dist.n):
        v = dist.values[s:]
        f = dist.masses[s:]
        m = v.size
        if m == 1:
            best = max(best, float(v[0] * f[0]))
            continue
        g1 = _grid(v[0], delta)
        if m == 2:
            # v2 - p2 >= (v2 - p1) e^{-T}
            p2 = _snap_down(v[1] - (v[1] - g1) * decay, v[1], delta)
            ok = p2 >= g1
            rev = np.where(ok, g1 * f[0] + p2 * f[1], -np.inf)
            best = max(best, float(rev.max()))
            continue
        g2 = _grid(v[1], delta)
        g2 = g2[g2 < v[1]]
        for lo in range(0, g1.size, chunk):
            p1 = g1[lo:lo + chunk, None]
            p2 = g2[None, :]
            ratio = (v[1] - p1) / (v[1] - p2)
            p3 = _snap_down(v[2] - (v[2] - p2) * ratio * decay, v[2], delta)
            ok = (p2 >= p1) & (p3 >= p2)
            rev = np.where(ok, p1 * f[0] + p2 * f[1] + p3 * f[2], -np.inf)
            best = max(best, float(rev.max()))
    return best


# ---------------------------------------------------------------------------
# uniform U[0, 1] closed form


@dataclass(frozen=True)
class UniformSolution:
    """Optimal curve for ``U[0, 1]``: flat at ``x`` on ``[x, y)``, slope one on
    ``[y, z)``, flat at ``top_price`` on ``[z, 1]``."""

    horizon: float
    x: float
    y: float
    z: float
    top_price: float
    revenue: float

    def price(self, v: float) -> float:
        if v < self.x:
            return math.inf
        if v < self.y:
            return self.x
        if v < self.z:
            return v - self.y + self.x
        return self.top_price

    def purchase_time(self, v: float) -> float:
        if v < self.x:
            return math.nan
        if v < self.y:
            return self.horizon
        if v < self.z:
            return (self.z - v) / (self.y - self.x)
        return 0.0

    def price_at_time(self, t: float) -> float:
        """The posted price is linear in time, from ``top_price`` down to ``x``."""
        return self.top_price - t * (self.y - self.x)

    def sample(self, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(v, p(v), t, p(t))`` on ``m`` evenly spaced points each."""
        v = np.linspace(0.0, 1.0, m)
        pv = np.array([self.price(x) for x in v])
        t = np.linspace(0.0, self.horizon, m)
        pt = np.array([self.price_at_time(s) for s in t])
        return v, pv, t, pt


def uniform_closed_form(T: float) -> UniformSolution:
    if T < 0:
        raise ValueError("time limit must be >= 0")
    d = T + 4.0
    return UniformSolution(float(T), 2 / d, 3 / d, (T + 3) / d, (T + 2) / d, (T + 2) / (2 * T + 8))


def with_config(config: SolverConfig, **overrides) -> SolverConfig:
    return replace(config, **overrides)
