import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pricer import _kernel
from pricer.curve import revenue, verify_ic_ir
from pricer.distribution import (QuantileOracle, ValueDistribution, discretize, myerson_price,
                                 suffix, uniform_over)
from pricer.solver import (SolverConfig, SolverError, Grouping, all_groupings, brute_force_reference,
                           c_star, group_prices, solve_c_for_span, solve_enum, solve_given_vmin,
                           solve_optimal, span, span_of_prices, t_star, uniform_closed_form)

LN2 = math.log(2.0)


@st.composite
def instances(draw, n_min=2, n_max=6, t_max=3.0):
    n = draw(st.integers(n_min, n_max))
    vals = sorted(draw(st.sets(st.integers(10, 1000), min_size=n, max_size=n)))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)))
    T = draw(st.floats(0.0, t_max))
    return ValueDistribution(np.array(vals) / 10.0, w / w.sum()), T


@st.composite
def groupings(draw, n):
    mask = draw(st.integers(0, (1 << (n - 1)) - 1))
    return Grouping((0,) + tuple(i for i in range(1, n) if mask >> (i - 1) & 1), n)


# ---------------------------------------------------------------------------
# groupings


def test_grouping_labels_and_masses():
    g = Grouping((0, 2), 3)
    assert g.labels() == (0, 0, 2)
    assert g.labels(offset=1) == (1, 1, 3)
    assert Grouping.from_labels([0, 0, 2]) == g
    np.testing.assert_allclose(g.masses([0.2, 0.3, 0.5]), [0.5, 0.5])
    assert g.merge(0) == Grouping.single(3)
    assert g.expand([3, 7.5]).tolist() == [3, 3, 7.5]
    with pytest.raises(ValueError):
        Grouping.from_labels([0, 1, 0])
    with pytest.raises(ValueError):
        Grouping((1, 2), 3)


def test_all_groupings_order():
    assert [g.labels() for g in all_groupings(3)] == [(0, 1, 2), (0, 0, 2), (0, 1, 1), (0, 0, 0)]
    assert len(list(all_groupings(6))) == 32


# ---------------------------------------------------------------------------
# closed forms


def test_group_prices_example(merge_example):
    d, eps = merge_example
    g = Grouping.identity(4)
    for c in (0.5, 3.0, 40.0):
        p = group_prices(g, d, c)
        assert p[0] == 100
        assert p[3] == pytest.approx(103 - 3 / c, rel=1e-12)
        assert p[1] == pytest.approx(101 + (1 - math.sqrt(1 + 12 / c)) / 2, rel=1e-12)


def test_group_prices_limits(small3):
    assert group_prices(Grouping.single(3), small3, 0.1).tolist() == [3.0]
    p = group_prices(Grouping.identity(3), small3, 1e12)
    np.testing.assert_allclose(p, [3, 4, 12], atol=1e-9)
    with pytest.raises(ValueError):
        group_prices(Grouping.identity(3), small3, 0.0)


def test_span_examples(small3):
    assert span_of_prices([3, 4, 12], [3, 7.5], Grouping((0, 2), 3)) == pytest.approx(LN2)
    assert span(Grouping.single(3), small3, 5.0) == 0
    assert span_of_prices([3, 4, 12], [3, 2, 9.5], Grouping.identity(3)) == pytest.approx(LN2)


def test_span_of_prices_undefined():
    assert span_of_prices([3, 4], [3, 4], Grouping.identity(2)) == math.inf


def test_solve_c_for_span_examples(small3):
    s = solve_c_for_span(Grouping((0, 2), 3), small3, LN2)
    np.testing.assert_allclose(s.prices, [3, 3, 7.5], atol=1e-9)
    assert s.revenue == pytest.approx(4.5, abs=1e-9)
    assert s.span == pytest.approx(LN2, abs=1e-10)
    s = solve_c_for_span(Grouping((0, 1), 3), small3, LN2)
    np.testing.assert_allclose(s.prices, [3, 3.5, 3.5], atol=1e-9)
    assert s.revenue == pytest.approx(10 / 3, abs=1e-9)
    s = solve_c_for_span(Grouping.identity(2), suffix(small3, 1), LN2)
    np.testing.assert_allclose(s.prices, [4, 8], atol=1e-9)
    assert s.revenue == pytest.approx(4, abs=1e-9)


def test_single_group_bypass(small3):
    s = solve_c_for_span(Grouping.single(3), small3, 1.0)
    assert s.c is None and s.span == 0 and s.revenue == pytest.approx(3)


def test_bisection_failure_reported(small3):
    cfg = SolverConfig(max_iter=1)
    with pytest.raises(SolverError):
        solve_c_for_span(Grouping.identity(3), small3, 0.123456, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(rtol=0)
    with pytest.raises(ValueError):
        SolverConfig(c_lo=10, c_hi=1)


def test_c_star_examples(merge_example):
    d, eps = merge_example
    g = Grouping.identity(4)
    for method in ("closed", "bisect"):
        assert c_star(g, d, 1, method=method) == pytest.approx(1 / (2 * eps), rel=0.01)
        assert c_star(g, d, 3, method=method) == 0
    two = ValueDistribution([2, 5], [0.4, 0.6])
    expected = 1 / (0.6 * 3)
    assert c_star(Grouping.identity(2), two, 0) == pytest.approx(expected, rel=1e-12)
    assert c_star(Grouping.identity(2), two, 0, method="bisect") == pytest.approx(expected, rel=1e-9)


def test_first_merge_is_middle_pair(merge_example):
    d, _ = merge_example
    g = Grouping.identity(4)
    cs = [c_star(g, d, k) for k in g.reps]
    assert int(np.argmax(cs)) == 1


def test_t_star_examples(small3):
    assert t_star(Grouping.single(3), small3) == 0
    two = ValueDistribution([2, 5], [0.4, 0.6])
    assert t_star(Grouping.identity(2), two) == pytest.approx(0, abs=1e-12)
    # a first group next to the last one can always meet at zero time
    assert t_star(Grouping((0, 2), 3), small3) == pytest.approx(0, abs=1e-12)
    g = Grouping.identity(3)
    ts = t_star(g, small3)
    # the identity row is invalid at ln2, so it needs more time than that
    assert ts > LN2
    assert solve_given_vmin(small3, 0, ts * 1.01).grouping == g
    assert solve_given_vmin(small3, 0, ts * 0.99).grouping != g


@given(instances(), st.data())
def test_closed_form_c_star_matches_bisection(inst, data):
    d, _ = inst
    g = data.draw(groupings(d.n))
    for k in g.reps:
        a = c_star(g, d, k, method="closed")
        b = c_star(g, d, k, method="bisect")
        if a == 0:
            assert b <= SolverConfig().c_lo * (1 + 1e-9)
        else:
            assert b == pytest.approx(a, rel=1e-8)


@given(instances(), st.data(), st.floats(-6, 6), st.floats(0.01, 3))
def test_span_increasing_in_c(inst, data, log_c, log_ratio):
    d, _ = inst
    g = data.draw(groupings(d.n))
    c1 = math.exp(log_c)
    c2 = c1 * math.exp(log_ratio)
    if g.n_groups > 1:
        assert span(g, d, c2) > span(g, d, c1)
    p1, p2 = group_prices(g, d, c1), group_prices(g, d, c2)
    assert np.all(p2[1:] > p1[1:])


@given(instances(), st.data())
def test_monotone_exactly_above_max_crossing(inst, data):
    d, _ = inst
    g = data.draw(groupings(d.n))
    if g.n_groups == 1:
        return
    cmax = max(c_star(g, d, k) for k in g.reps)
    if cmax <= 0:
        assert np.all(np.diff(group_prices(g, d, 1e-6)) >= -1e-9)
        return
    above = group_prices(g, d, cmax * (1 + 1e-6))
    below = group_prices(g, d, cmax * (1 - 1e-3))
    assert np.all(np.diff(above) >= -1e-9 * d.max_value)
    assert np.any(np.diff(below) < 0)


# ---------------------------------------------------------------------------
# solvers


def test_solve_given_vmin_examples(small3, merge_example):
    s = solve_given_vmin(small3, 0, LN2)
    assert s.grouping.labels() == (0, 0, 2)
    np.testing.assert_allclose(s.prices, [3, 3, 7.5], atol=1e-9)
    s = solve_given_vmin(small3, 2, LN2)
    assert s.prices.tolist() == [12] and s.span == 0

    d, _ = merge_example
    g = Grouping.identity(4)
    first = span(g, d, max(c_star(g, d, k) for k in g.reps))
    for method in ("fast", "direct"):
        s = solve_given_vmin(d, 0, first * 0.999, method=method)
        p = s.prices
        assert p[0] < p[1] - 1e-6
        assert p[1] == p[2]
        assert p[2] < p[3] - 1e-6


def test_solve_optimal_examples(small3, three_hundred):
    s = solve_optimal(small3, LN2)
    assert s.revenue == pytest.approx(4.5, abs=1e-9) and s.v_min == 0
    s = solve_optimal(small3, 0.0)
    assert s.revenue == pytest.approx(4) and s.v_min == 2
    np.testing.assert_allclose(s.prices[2], 12)
    s = solve_optimal(three_hundred, 2 * LN2)
    np.testing.assert_allclose(s.prices, [100, 100.5, 101.25], atol=1e-9)
    np.testing.assert_allclose(s.assignment.times, [2 * LN2, LN2, 0], atol=1e-9)
    assert s.revenue == pytest.approx(301.75 / 3, abs=1e-9)


def test_singleton():
    d = uniform_over([5.0])
    for fn in (solve_optimal, solve_enum):
        s = fn(d, 3.0)
        assert s.revenue == 5 and len(s.curve) == 1
        assert s.curve.posts[0].t == 0 and s.curve.posts[0].p == 5


def test_enum_table(small3):
    s = solve_enum(small3, LN2)
    assert len(s.table) == 7
    assert [r.valid for r in s.table] == [False, True, True, True, True, True, True]
    assert s.revenue == pytest.approx(4.5)
    assert solve_enum(uniform_over([2.0]), 1).table[0].revenue == 2
    with pytest.raises(ValueError):
        solve_enum(uniform_over(list(range(1, 14))), 1.0)


def test_negative_horizon_rejected(small3):
    with pytest.raises(ValueError):
        solve_optimal(small3, -0.1)
    with pytest.raises(ValueError):
        uniform_closed_form(-1)


@given(instances())
def test_fast_direct_enum_agree(inst):
    d, T = inst
    a = solve_enum(d, T)
    for method in ("fast", "direct"):
        b = solve_optimal(d, T, method=method)
        assert b.revenue == pytest.approx(a.revenue, abs=1e-6)
        np.testing.assert_allclose(np.nan_to_num(b.prices, nan=-1), np.nan_to_num(a.prices, nan=-1),
                                   atol=1e-6)


@given(instances())
def test_solution_is_feasible(inst):
    d, T = inst
    s = solve_optimal(d, T)
    r = verify_ic_ir(s.assignment, s.horizon)
    assert r.passed, r.violations
    assert r.worst_violation <= 1e-8
    assert revenue(s.curve, d) == pytest.approx(s.revenue, abs=1e-9 * max(1, d.max_value))
    if s.grouping.n_groups >= 2:
        assert s.span == pytest.approx(T, abs=1e-8)


@given(instances(), st.floats(0.0, 2.0))
def test_revenue_nondecreasing_in_horizon(inst, extra):
    d, T = inst
    assert solve_optimal(d, T + extra).revenue >= solve_optimal(d, T).revenue - 1e-9


@given(instances(n_max=5), st.integers(0, 1000))
def test_unique_under_reordering_and_brackets(inst, seed):
    d, T = inst
    a = solve_enum(d, T)
    b = solve_enum(d, T, shuffle_seed=seed)
    c = solve_optimal(d, T, SolverConfig(c_lo=1e-3, c_hi=1e3, factor=3.0))
    for other in (b, c):
        np.testing.assert_allclose(np.nan_to_num(other.prices, nan=-1),
                                   np.nan_to_num(a.prices, nan=-1), atol=1e-8)


def test_horizon_zero_is_myerson():
    for d in (uniform_over([3, 4, 12]), ValueDistribution([1, 2, 3, 7], [0.4, 0.3, 0.2, 0.1])):
        assert solve_optimal(d, 0.0).revenue == pytest.approx(myerson_price(d)[1], abs=1e-12)


def test_kernel_merge_sequence_matches_direct_loop(merge_example):
    d, _ = merge_example
    absorbed, kept, cmax = _kernel.merge_sequence(d.values.copy(), d.masses.copy())
    assert absorbed[0] == 2 and kept[0] == 1
    assert np.all(np.diff(cmax) <= 1e-9 * cmax[0])


# ---------------------------------------------------------------------------
# grid oracle and uniform closed form


def test_brute_force_examples(small3):
    assert brute_force_reference(small3, LN2, 0.01) == pytest.approx(4.5, abs=0.02)
    assert brute_force_reference(uniform_over([5.0]), 1, 0.1) == 5
    assert brute_force_reference(uniform_over([1.0, 2.0]), 0.0, 0.01) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        brute_force_reference(uniform_over([1, 2, 3, 4]), 1, 0.1)


@given(instances(n_max=3, t_max=2.0))
def test_brute_force_is_lower_bound(inst):
    d, T = inst
    assert brute_force_reference(d, T, 0.05) <= solve_optimal(d, T).revenue + 1e-9


@pytest.mark.parametrize("T,x,y,z,top,rev", [
    (1.0, 0.4, 0.6, 0.8, 0.6, 0.3),
    (6.0, 0.2, 0.3, 0.9, 0.8, 0.4),
    (0.0, 0.5, 0.75, 0.75, 0.5, 0.25),
])
def test_uniform_closed_form(T, x, y, z, top, rev):
    u = uniform_closed_form(T)
    assert (u.x, u.y, u.z, u.top_price, u.revenue) == pytest.approx((x, y, z, top, rev))


def test_uniform_closed_form_is_consistent():
    u = uniform_closed_form(1.0)
    assert math.isinf(u.price(0.3))
    assert u.price(0.5) == pytest.approx(0.4)
    assert u.price(0.7) == pytest.approx(0.5)
    assert u.price(0.9) == pytest.approx(0.6)
    assert u.price_at_time(0) == pytest.approx(0.6)
    assert u.price_at_time(1) == pytest.approx(0.4)
    # buyers on the slope buy where their price meets the time line
    assert u.price_at_time(u.purchase_time(0.7)) == pytest.approx(u.price(0.7))
    # revenue integrates p(v) over U[0,1]
    v = np.linspace(0, 1, 200001)
    p = np.array([u.price(a) for a in v])
    assert np.mean(np.where(np.isinf(p), 0, p)) == pytest.approx(0.3, abs=1e-4)


def test_uniform_discretized_small():
    pair = discretize(QuantileOracle.uniform(), 200)
    s = solve_optimal(pair.upper, 1.0)
    assert s.revenue == pytest.approx(0.3, abs=0.01)
