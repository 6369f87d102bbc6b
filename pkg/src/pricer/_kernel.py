"""Compiled merge loop for the polynomial-time solver.

Everything here works on plain float arrays for one participating suffix
(``v[0]`` is the lowest participant and always pays ``v[0]``). When numba
is missing the functions run as ordinary Python.
"""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


@njit(cache=True)
def crossing_c(first, d1, fk, fx, d2):
    """Smallest c at which group k's price stops exceeding the next group's.

    ``d1`` is the gap from k to the next representative, ``d2`` the gap from
    the next to the one after it (negative when the next group is last),
    ``fk``/``fx`` the two group masses. Returns 0 when the pair never
    crosses.
    """
    if first:
        if d2 < 0:
            u = fx * d1
        else:
            u = fx * d1 * (d1 + d2) / d2
    else:
        if d2 < 0:
            u = d1 * fx * (fx + fk) / fk
        else:
            den = fk * d2 - fx * d1
            if den <= 0.0:
                return 0.0
            a = fx * d1 * (d1 + d2) / den
            u = fk * a * (a + d1) / d1
    return 1.0 / u


@njit(cache=True)
def group_gaps(v, gm, reps, c):
    """``v_k - p_k`` for every representative at Lagrange constant ``c``."""
    m = reps.size
    a = np.zeros(m)
    for j in range(1, m):
        u = 1.0 / (c * gm[j])
        if j == m - 1:
            a[j] = u
        else:
            d = v[reps[j + 1]] - v[reps[j]]
            a[j] = 2.0 * d * u / (d + math.sqrt(d * d + 4.0 * d * u))
    return a


@njit(cache=True)
def group_span(v, gm, reps, c):
    m = reps.size
    if m == 1:
        return 0.0
    a = group_gaps(v, gm, reps, c)
    s = 0.0
    for j in range(1, m):
        if a[j] <= 0.0:
            return math.inf
        s += math.log(v[reps[j]] - v[reps[j - 1]] + a[j - 1]) - math.log(a[j])
    return s


@njit(cache=True)
def _pair_c(v, gm, nxt, k, m):
    nx = nxt[k]
    if nx >= m:
        return -1.0
    nn = nxt[nx]
    d2 = -1.0 if nn >= m else v[nn] - v[nx]
    return crossing_c(k == 0, v[nx] - v[k], gm[k], gm[nx], d2)


@njit(cache=True)
def _tree_set(tree, val, size, k, x):
    val[k] = x
    node = (k + size) // 2
    while node >= 1:
        left = tree[2 * node]
        right = tree[2 * node + 1]
        if right < 0 or (left >= 0 and val[left] >= val[right]):
            tree[node] = left
        else:
            tree[node] = right
        node //= 2


@njit(cache=True)
def merge_sequence(v, f):
    """Run every merge down to a single group.

    Returns ``(absorbed, kept, cmax)``: at step ``j`` the group starting at
    ``absorbed[j]`` joins the group starting at ``kept[j]``, at crossing
    constant ``cmax[j]``. Ties on the crossing constant merge the lowest
    representative first.
    """
    m = v.size
    steps = max(m - 1, 0)
    absorbed = np.empty(steps, dtype=np.int64)
    kept = np.empty(steps, dtype=np.int64)
    cmax = np.empty(steps)
    if steps == 0:
        return absorbed, kept, cmax
    nxt = np.arange(1, m + 1)
    prv = np.arange(-1, m - 1)
    gm = f.copy()
    size = 1
    while size < m:
        size *= 2
    val = np.full(size, -2.0)
    tree = np.full(2 * size, -1, dtype=np.int64)
    for k in range(m):
        val[k] = _pair_c(v, gm, nxt, k, m)
        tree[size + k] = k
    for node in range(size - 1, 0, -1):
        left = tree[2 * node]
        right = tree[2 * node + 1]
        if right < 0 or (left >= 0 and val[left] >= val[right]):
            tree[node] = left
        else:
            tree[node] = right
    for j in range(steps):
        k = tree[1]
        nx = nxt[k]
        absorbed[j] = nx
        kept[j] = k
        cmax[j] = val[k]
        gm[k] += gm[nx]
        nn = nxt[nx]
        nxt[k] = nn
        if nn < m:
            prv[nn] = k
        _tree_set(tree, val, size, nx, -2.0)
        _tree_set(tree, val, size, k, _pair_c(v, gm, nxt, k, m))
        if k > 0:
            pk = prv[k]
            _tree_set(tree, val, size, pk, _pair_c(v, gm, nxt, pk, m))
    return absorbed, kept, cmax


@njit(cache=True)
def grouping_after(f, absorbed, j):
    """Representatives and group masses after the first ``j`` merges."""
    m = f.size
    is_rep = np.ones(m, dtype=np.bool_)
    for s in range(j):
        is_rep[absorbed[s]] = False
    reps = np.flatnonzero(is_rep)
    gm = np.zeros(reps.size)
    g = -1
    for i in range(m):
        if is_rep[i]:
            g += 1
        gm[g] += f[i]
    return reps, gm


@njit(cache=True)
def solve_c(v, gm, reps, T, lo, hi, rtol, max_iter, factor):
    """Geometric bisection for ``span(c) = T``; returns ``(c, converged)``."""
    tol = rtol * max(1.0, T)
    n_expand = 0
    while group_span(v, gm, reps, lo) > T:
        lo /= factor
        n_expand += 1
        if lo < 1e-300 or n_expand > 2000:
            return lo, False
    while group_span(v, gm, reps, hi) < T:
        hi *= factor
        n_expand += 1
        if hi > 1e300 or n_expand > 2000:
            return hi, False
    best_c = lo
    best_err = abs(group_span(v, gm, reps, lo) - T)
    err_hi = abs(group_span(v, gm, reps, hi) - T)
    if err_hi < best_err:
        best_c, best_err = hi, err_hi
    collapsed = False
    for _ in range(max_iter):
        if best_err <= tol:
            return best_c, True
        mid = math.sqrt(lo) * math.sqrt(hi)
        if not (lo < mid < hi):
            collapsed = True
            break
        s = group_span(v, gm, reps, mid) - T
        if abs(s) < best_err:
            best_c, best_err = mid, abs(s)
        if s > 0:
            hi = mid
        else:
            lo = mid
    # a bracket collapsed to adjacent floats is as close as c can get
    return best_c, best_err <= tol or collapsed


@njit(cache=True)
def stopping_step(v, f, absorbed, cmax, T):
    """First merge step whose grouping is already valid at horizon ``T``.

    The per-step horizon is nonincreasing along the merge sequence, so a
    binary search finds the step the sequential loop would stop at.
    """
    m = v.size
    lo, hi = 0, m - 1
    while lo < hi:
        mid = (lo + hi) // 2
        reps, gm = grouping_after(f, absorbed, mid)
        if group_span(v, gm, reps, cmax[mid]) <= T:
            hi = mid
        else:
            lo = mid + 1
    return hi


@njit(cache=True)
def solve_suffix(v, f, T, rtol, max_iter, factor):
    """Optimal grouping step and constant for one participating suffix.

    Returns ``(step, c, converged)``; ``c`` is NaN when everything ends up
    in one group.
    """
    m = v.size
    if m == 1:
        return 0, math.nan, True
    absorbed, kept, cmax = merge_sequence(v, f)
    j = stopping_step(v, f, absorbed, cmax, T)
    if j == m - 1:
        return j, math.nan, True
    reps, gm = grouping_after(f, absorbed, j)
    lo = cmax[j]
    hi = cmax[j - 1] if j > 0 else lo * factor
    if hi <= lo:
        hi = lo * factor
    c, ok = solve_c(v, gm, reps, T, lo, hi, rtol, max_iter, factor)
    return j, c, ok


@njit(cache=True)
def suffix_revenue(v, f, step, c):
    """Revenue of the suffix solution returned by :func:`solve_suffix`."""
    if math.isnan(c):
        total = 0.0
        for i in range(f.size):
            total += f[i]
        return v[0] * total
    absorbed, _, _ = merge_sequence(v, f)
    reps, gm = grouping_after(f, absorbed, step)
    a = group_gaps(v, gm, reps, c)
    rev = 0.0
    for j in range(reps.size):
        rev += (v[reps[j]] - a[j]) * gm[j]
    return rev


@njit(cache=True)
def best_vmin(v, f, T, rtol, max_iter, factor):
    """Lowest participant with the highest revenue; ``-1`` on a failed bisection.

    Suffixes whose welfare cannot beat the incumbent are skipped and
    near-ties (relative 1e-12) keep the lower participant.
    """
    m = v.size
    tail = np.zeros(m + 1)
    for i in range(m - 1, -1, -1):
        tail[i] = tail[i + 1] + v[i] * f[i]
    best_i = -1
    best_rev = -1.0
    for i in range(m):
        if best_i >= 0 and tail[i] <= best_rev:
            continue
        vs = v[i:].copy()
        fs = f[i:].copy()
        step, c, ok = solve_suffix(vs, fs, T, rtol, max_iter, factor)
        if not ok:
            return -1, best_rev
        rev = suffix_revenue(vs, fs, step, c)
        if best_i < 0 or rev > best_rev + 1e-12 * max(1.0, abs(best_rev)):
            best_i, best_rev = i, rev
    return best_i, best_rev
