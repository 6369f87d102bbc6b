import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pricer.curve import (Assignment, PricingCurve, best_response, choices, curve_csv,
                          curve_from_assignment, map_discount_horizon, payments, revenue,
                          times_from_prices, value_price_csv, verify_ic_ir)
from pricer.distribution import QuantileOracle, ValueDistribution, discretize, dominates, uniform_over

from test_distribution import distributions

LN2 = math.log(2.0)


@pytest.fixture
def hundreds_curve():
    return PricingCurve.from_pairs([(0, 101.25), (LN2, 100.5), (2 * LN2, 100)], 2 * LN2)


@st.composite
def curves(draw, max_posts=6, max_price=100.0):
    k = draw(st.integers(0, max_posts))
    ts = sorted(draw(st.lists(st.floats(0, 3), min_size=k, max_size=k)))
    ps = draw(st.lists(st.floats(0, max_price), min_size=k, max_size=k))
    return PricingCurve.from_pairs(list(zip(ts, ps)), 3.0)


def test_best_response_examples(hundreds_curve):
    d = best_response(hundreds_curve, 102)
    assert d.choice == 0 and d.utility == pytest.approx(0.75)
    d = best_response(hundreds_curve, 101)
    # 0.25 at ln2 and at 2 ln2; the earlier post wins
    assert d.choice == 1 and d.utility == pytest.approx(0.25)
    d = best_response(PricingCurve((), 1.0), 5)
    assert not d.buys and d.utility == 0


def test_zero_utility_purchase_taken(hundreds_curve):
    d = best_response(hundreds_curve, 100)
    assert d.choice == 2 and d.utility == 0


def test_abstain_when_all_negative():
    c = PricingCurve.from_pairs([(0, 5)], 1)
    assert not best_response(c, 4).buys
    assert choices(c, [4, 5, 6]).tolist() == [-1, 0, 0]


def test_revenue_examples(hundreds_curve, small3):
    assert revenue(hundreds_curve, uniform_over([100, 101, 102])) == pytest.approx(301.75 / 3)
    c = PricingCurve.from_pairs([(0, 7.5), (LN2, 3)], LN2)
    assert revenue(c, small3) == pytest.approx(4.5)
    assert revenue(PricingCurve((), 0.0), small3) == 0


def test_curve_validation():
    with pytest.raises(ValueError):
        PricingCurve.from_pairs([(1, 2), (0, 3)], 2)
    with pytest.raises(ValueError):
        PricingCurve.from_pairs([(0, 2), (3, 1)], 2)
    with pytest.raises(ValueError):
        PricingCurve.from_pairs([(0, math.inf)], 2)
    with pytest.raises(ValueError):
        PricingCurve((), -1)


def test_times_from_prices_examples():
    a = times_from_prices([3, 3, 7.5], [3, 4, 12])
    np.testing.assert_allclose(a.times, [LN2, LN2, 0], atol=1e-15)
    assert a.span == pytest.approx(LN2)
    a = times_from_prices([2, 2, 2], [3, 4, 12])
    assert a.times.tolist() == [0, 0, 0] and a.span == 0
    a = times_from_prices([100, 100.5, 101.25], [100, 101, 102])
    np.testing.assert_allclose(a.times, [2 * LN2, LN2, 0], atol=1e-12)


def test_times_from_prices_suffix_and_errors():
    a = times_from_prices([4, 8], [3, 4, 12], start=1)
    assert math.isnan(a.prices[0]) and a.start == 1
    assert a.times[1] == pytest.approx(LN2)
    with pytest.raises(ValueError):
        times_from_prices([3, 5, 7], [3, 4, 12])
    with pytest.raises(ValueError):
        times_from_prices([3, 2, 9.5], [3, 4, 12])
    with pytest.raises(ValueError):
        times_from_prices([3, 3], [3, 4, 12])
    a = times_from_prices([3, 2, 9.5], [3, 4, 12], check=False)
    assert a.span == pytest.approx(LN2)


def test_curve_from_assignment_examples():
    a = times_from_prices([3, 3, 7.5], [3, 4, 12])
    c = curve_from_assignment(a, LN2)
    assert len(c) == 2
    assert c.posts[0].t == 0 and c.posts[0].p == 7.5
    assert c.posts[1].t == pytest.approx(LN2) and c.posts[1].p == 3
    single = curve_from_assignment(times_from_prices([5], [5]))
    assert len(single) == 1 and single.posts[0].p == 5
    c = curve_from_assignment(times_from_prices([100, 100.5, 101.25], [100, 101, 102]))
    assert [q.p for q in c.posts] == [101.25, 100.5, 100]


def test_curve_from_assignment_rejects_nonmonotone():
    a = times_from_prices([3, 2, 9.5], [3, 4, 12], check=False)
    with pytest.raises(ValueError):
        curve_from_assignment(a)


def test_verify_examples():
    good = times_from_prices([3, 3, 7.5], [3, 4, 12])
    r = verify_ic_ir(good, LN2)
    assert r.passed and r.worst_violation <= 1e-12
    bad = times_from_prices([3, 2, 9.5], [3, 4, 12], check=False)
    r = verify_ic_ir(bad, LN2)
    assert not r.passed and not r.monotone
    assert verify_ic_ir(times_from_prices([5], [5]), 0).passed


def test_verify_flags_time_and_ir():
    a = times_from_prices([3, 3, 7.5], [3, 4, 12])
    assert not verify_ic_ir(a, 0.5).passed
    a = Assignment(np.array([1.0, 2.0]), np.array([1.5, 2.0]), np.array([0.0, 0.0]))
    assert not verify_ic_ir(a, 1).passed


def test_map_discount_examples():
    T, mapped = map_discount_horizon(lambda t: math.exp(-t), 2.0, times=[0.5])
    assert T == pytest.approx(2) and mapped[0] == pytest.approx(0.5)
    T, _ = map_discount_horizon(lambda t: 1 / (1 + t), 1.0)
    assert T == pytest.approx(LN2)
    T, _ = map_discount_horizon([1.0, 0.5, 0.25])
    assert T == pytest.approx(2 * LN2)
    with pytest.raises(ValueError):
        map_discount_horizon([1.0, 0.0])
    with pytest.raises(ValueError):
        map_discount_horizon([0.5, 0.7])


def test_csv_output():
    c = PricingCurve.from_pairs([(0, 7.5), (LN2, 3)], LN2)
    assert curve_csv(c).splitlines()[0] == "t,p"
    assert value_price_csv([0, 1], [math.nan, 0.5]) == "v,p\n0,\n1,0.5\n"


def test_json_roundtrip():
    c = PricingCurve.from_pairs([(0, 7.5), (LN2, 3)], LN2)
    assert PricingCurve.from_json(c.to_json()) == c


@given(curves(), st.floats(0, 120))
def test_best_response_dominates_every_post(curve, v):
    d = best_response(curve, v)
    for q in curve.posts:
        assert d.utility >= (v - q.p) * math.exp(-q.t) - 1e-9 * max(1, v)
    assert d.utility >= -1e-9 * max(1, v)


@given(curves(), st.floats(0, 120), st.floats(0, 120))
def test_monotone_allocation(curve, v1, v2):
    lo, hi = sorted((v1, v2))
    a, b = best_response(curve, lo), best_response(curve, hi)
    if a.buys:
        assert b.buys
        assert b.time <= a.time + 1e-9 or abs((hi - b.price) * math.exp(-b.time)
                                               - (hi - a.price) * math.exp(-a.time)) < 1e-6
        assert b.price >= a.price - 1e-6


@st.composite
def assignments(draw):
    n = draw(st.integers(1, 6))
    vals = np.array(sorted(draw(st.sets(st.integers(1, 200), min_size=n, max_size=n))), float)
    start = draw(st.integers(0, n - 1))
    v = vals[start:]
    # nondecreasing prices with p_1 <= v_1 and p_i < v_i
    fracs = draw(st.lists(st.floats(0, 0.95), min_size=v.size, max_size=v.size))
    # excluded low values must not want the lowest participant's option
    p = [v[0] if start else min(v[0], v[0] * fracs[0] + v[0] * 0.05)]
    for vi, fr in zip(v[1:], fracs[1:]):
        p.append(p[-1] + fr * (vi - p[-1]))
    return times_from_prices(p, vals, start)


@given(assignments())
def test_round_trip_through_curve(a):
    c = curve_from_assignment(a)
    part = a.participants
    for v, p, t in zip(a.values[part], a.prices[part], a.times[part]):
        d = best_response(c, v)
        own = (v - p) * math.exp(-t)
        assert d.buys
        assert d.utility == pytest.approx(own, abs=1e-9 * max(1, v))
    assert verify_ic_ir(a, a.span).passed


@given(curves(max_price=10.0), distributions(max_n=5), st.integers(1, 40))
def test_dominance_orders_revenue(curve, d, k):
    pair = discretize(QuantileOracle.from_distribution(d), k)
    hi, mid, lo = revenue(curve, pair.upper), revenue(curve, d), revenue(curve, pair.lower)
    assert hi >= mid - 1e-9 and mid >= lo - 1e-9
    assert hi <= lo + d.max_value / k + 1e-9


def test_dominance_example():
    c = PricingCurve.from_pairs([(0, 1.5)], 1)
    a = ValueDistribution([1, 2], [0.1, 0.9])
    b = ValueDistribution([1, 2], [0.9, 0.1])
    assert dominates(a, b)
    assert revenue(c, a) >= revenue(c, b)
    np.testing.assert_allclose(payments(c, [1, 2]), [0, 1.5])
