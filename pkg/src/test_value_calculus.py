"""Tests for derivatives, motion classes and event detectors"""

import itertools
import json

import numpy as np
import pytest

from value_calculus import (
    Event, GridMismatchError, Series, SeriesTooShortError, classify_motion, cumulative, default_tolerance,
    derivative, derivatives, detect_gov_optimum, detect_max_vg, detect_motion_changes, detect_org_optimum,
    detect_peak_marginal_vg, detect_stable_market, detect_subsidy_cross, events_to_json, motion_profile,
)


def sampled(fn, dt, n, t0=0.0):
    t = t0 + dt * np.arange(n)
    return Series(t0=t0, dt=dt, values=fn(t))


def test_first_derivative_exact_on_quadratic():
    d = derivative(Series.from_values([0, 1, 4, 9, 16]), 1)
    assert d.values[2] == 4.0
    assert list(d.values[1:-1]) == [2.0, 4.0, 6.0]


def test_third_derivative_exact_on_cubic():
    s = Series.from_values([t**3 for t in range(7)])
    d3 = derivative(s, 3)
    assert list(d3.values[2:-2]) == [6.0, 6.0, 6.0]
    d2 = derivative(s, 2)
    assert list(d2.values[1:-1]) == [6.0 * t for t in range(1, 6)]


@pytest.mark.parametrize("order", [1, 2, 3])
def test_constant_series_has_zero_derivatives(order):
    d = derivative(Series.from_values([3.5] * 6, dt=0.25), order)
    assert np.all(d.values == 0.0)


def test_boundary_points_are_flagged():
    s = Series.from_values(range(7))
    assert list(derivative(s, 1).central) == [False, True, True, True, True, True, False]
    assert list(derivative(s, 2).central) == [False, True, True, True, True, True, False]
    assert list(derivative(s, 3).central) == [False, False, True, True, True, False, False]


def test_derivative_keeps_grid():
    s = Series.from_values(range(10), dt=0.5, t0=2.0)
    d = derivatives(s)
    for dk in (d.v1, d.v2, d.v3):
        assert (dk.t0, dk.dt, len(dk)) == (2.0, 0.5, 10)


@pytest.mark.parametrize("n, order", [(2, 1), (2, 2), (4, 3), (1, 1)])
def test_series_too_short(n, order):
    with pytest.raises(SeriesTooShortError):
        derivative(Series.from_values(range(n)), order)


def test_invalid_order_and_series():
    with pytest.raises(ValueError):
        derivative(Series.from_values(range(10)), 4)
    with pytest.raises(ValueError):
        Series.from_values([1.0, 2.0], dt=0)
    with pytest.raises(ValueError):
        Series.from_values([])


def test_linearity():
    rng = np.random.default_rng(5)
    x, y = rng.normal(size=50), rng.normal(size=50)
    a, b = 2.5, -0.75
    for order in (1, 2, 3):
        left = derivative(Series.from_values(a * x + b * y), order).values
        right = a * derivative(Series.from_values(x), order).values + b * derivative(Series.from_values(y), order).values
        scale = max(1.0, float(np.max(np.abs(right))))
        assert np.allclose(left, right, rtol=1e-12, atol=1e-12 * scale)


# ---------------------------------------------------------------------------
# motion
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("v, label, column", [
    ((1.0, 0.5, 0.2), "positive and increasing / fast", 1),
    ((1.0, 0.5, -0.2), "positive and increasing / slowly", 2),
    ((1.0, -0.5, 0.2), "positive and decreasing / fast", 3),
    ((-1.0, 0.5, -0.2), "negative and increasing / slowly", 6),
    ((-1.0, -0.5, -0.2), "negative and decreasing / slowly", 8),
])
def test_classify_motion(v, label, column):
    motion = classify_motion(*v)
    assert motion.label == label
    assert motion.column == column


def test_deadband_gives_steady():
    motion = classify_motion(0.0, 1.0, 1.0, deadband=0.01)
    assert motion.label == "steady"
    assert motion.column == 0
    assert motion.signs == ("0", "+", "+")


def test_classification_is_total():
    labels = set()
    for v in itertools.product([-2.0, -1e-12, 0.0, 1e-12, 3.0], repeat=3):
        motion = classify_motion(*v, deadband=1e-9)
        assert motion.column in range(9)
        assert (motion.column == 0) == (motion.label == "steady")
        labels.add(motion.label)
    assert len(labels) == 9


def test_motion_profile_of_cubic():
    s = sampled(lambda t: t**3, 1.0, 10, t0=1.0)
    profile = motion_profile(s)
    assert [k for k, _ in profile] == list(range(2, 8))
    assert {m.label for _, m in profile} == {"positive and increasing / fast"}


def test_motion_changes():
    s = sampled(lambda t: t**3, 1.0, 10, t0=1.0)
    events = detect_motion_changes(s)
    assert len(events) == 1
    assert events[0].kind == "MotionChange"
    assert events[0].tick == 2
    assert events[0].flags == ("positive and increasing / fast",)
    assert events[0].witness["v3"] == 6.0


# ---------------------------------------------------------------------------
# detectors
# ---------------------------------------------------------------------------

def test_max_vg_on_parabola():
    dt = 0.1
    vg = sampled(lambda t: 25 - (t - 5) ** 2, dt, 101)
    vl = sampled(lambda t: 2 * t, dt, 101)
    va = Series(t0=0.0, dt=dt, values=vg.values + vl.values)
    events = detect_max_vg(vg, va, vl)
    assert len(events) == 1
    event = events[0]
    assert event.kind == "MaxVG"
    assert event.tick == 50
    assert event.time == pytest.approx(5.0, abs=dt)
    assert "consistent" in event.flags
    assert event.witness["gap"] <= default_tolerance(derivative(vg, 1))


def test_max_vg_inconsistent_witness():
    dt = 0.1
    vg = sampled(lambda t: 25 - (t - 5) ** 2, dt, 101)
    flat = sampled(lambda t: 0 * t, dt, 101)
    va = sampled(lambda t: 3 * t, dt, 101)
    events = detect_max_vg(vg, va, flat, tol=0.01)
    assert len(events) == 1
    assert events[0].flags == ()
    assert events[0].witness["gap"] == pytest.approx(3.0)


def test_max_vg_ignores_increasing_series():
    s = sampled(lambda t: t**2 + t, 0.1, 50)
    assert detect_max_vg(s, s, s) == []


def test_max_vg_ignores_minimum():
    s = sampled(lambda t: (t - 2) ** 2, 0.1, 50)
    assert detect_max_vg(s, s, s) == []


def test_peak_marginal_vg():
    dt = 0.05
    vg = sampled(lambda t: -(t - 2) ** 3 + 12 * t, dt, 81)
    events = detect_peak_marginal_vg(vg, vg, Series(0.0, dt, np.zeros(81)))
    assert len(events) == 1
    # VG'' = -6 (t - 2) changes sign at t = 2, where VG' = 12 is largest
    assert events[0].time == pytest.approx(2.0, abs=dt)
    assert "maximum" in events[0].flags


def test_stable_market_equal_slopes():
    va = sampled(lambda t: 3 * t, 1.0, 11)
    vl = sampled(lambda t: 3 * t + 7, 1.0, 11)
    events = detect_stable_market(va, vl, tol=1e-9)
    assert [e.tick for e in events] == list(range(1, 10))
    assert all(e.kind == "StableMarket" and e.witness["gap"] == 0.0 for e in events)


def test_stable_market_single_point():
    va = sampled(lambda t: t**2, 0.01, 201)
    vl = sampled(lambda t: 2 * t, 0.01, 201)
    events = detect_stable_market(va, vl, default_tolerance(derivative(va, 1)))
    assert events
    assert all(e.time == pytest.approx(1.0, abs=0.01) for e in events)


def test_stable_market_disjoint_slopes():
    va = sampled(lambda t: 3 * t, 1.0, 11)
    vl = sampled(lambda t: 5 * t, 1.0, 11)
    assert detect_stable_market(va, vl, tol=0.1) == []


def test_subsidy_cross_locates_crossing():
    dt = 0.01
    ve_g = sampled(lambda t: 10 * t - t**2 / 2, dt, 1001)
    vg_n = sampled(lambda t: t**2, dt, 1001)
    event = detect_subsidy_cross(ve_g, vg_n)
    assert event is not None
    assert event.kind == "SubsidyCross"
    assert (event.witness["tick_lo"], event.witness["tick_hi"]) == (333.0, 334.0)
    assert 3.33 <= event.time <= 3.34
    assert event.time == pytest.approx(10 / 3, abs=1e-6)
    assert event.witness["veg_prime"] == pytest.approx(event.witness["vgn_prime"], abs=1e-6)


def test_subsidy_cross_identical_series():
    s = sampled(lambda t: t**2, 0.1, 30)
    event = detect_subsidy_cross(s, s)
    assert event.tick == 1
    assert event.witness["difference"] == 0.0
    assert event.flags == ("degenerate",)


def test_subsidy_cross_none_when_always_above():
    ve_g = sampled(lambda t: 10 * t, 0.1, 41)
    vg_n = sampled(lambda t: t**2, 0.1, 41)
    assert detect_subsidy_cross(ve_g, vg_n) is None


def test_gov_optimum():
    dt = 0.01
    vg_g = sampled(lambda t: 10 * t - t**2, dt, 701)
    vg_c = sampled(lambda t: 4 * t - t**2, dt, 701)
    events = detect_gov_optimum(vg_g, vg_c)
    assert len(events) == 1
    event = events[0]
    assert event.time == pytest.approx(3.5, abs=dt)
    assert event.witness["vgg_prime"] == pytest.approx(3.0, abs=0.02)
    assert event.witness["neg_vgc_prime"] == pytest.approx(3.0, abs=0.02)
    assert event.witness["sum"] == pytest.approx(event.witness["vgg_prime"] - event.witness["neg_vgc_prime"])
    assert event.witness["sum"] == pytest.approx(0.0, abs=1e-6)


def test_gov_optimum_plateau():
    vg_g = sampled(lambda t: 10 * t - t**2, 0.1, 20)
    vg_c = Series(0.0, 0.1, -vg_g.values)
    events = detect_gov_optimum(vg_g, vg_c)
    assert [e.tick for e in events] == list(range(1, 19))
    assert all(e.flags == ("degenerate plateau",) for e in events)


def test_gov_optimum_increasing_sum():
    vg_g = sampled(lambda t: t**2, 0.1, 50)
    vg_c = sampled(lambda t: t, 0.1, 50)
    assert detect_gov_optimum(vg_g, vg_c) == []


def test_org_optimum():
    dt = 0.01
    vg_n = sampled(lambda t: 6 * t - t**2, dt, 601)
    vg_g = sampled(lambda t: -t**2, dt, 601)
    events = detect_org_optimum(vg_n, vg_g)
    assert len(events) == 1
    assert events[0].kind == "OrgOptimum"
    assert events[0].time == pytest.approx(1.5, abs=dt)


@pytest.mark.parametrize("other", [
    Series.from_values(range(9)),
    Series.from_values(range(10), dt=0.5),
    Series.from_values(range(10), t0=1.0),
])
def test_grid_mismatch(other):
    s = Series.from_values(range(10))
    with pytest.raises(GridMismatchError):
        detect_max_vg(s, other, s)
    with pytest.raises(GridMismatchError):
        detect_gov_optimum(s, other)


# ---------------------------------------------------------------------------
# cumulative and output
# ---------------------------------------------------------------------------

def test_cumulative_of_constant():
    assert list(cumulative(Series.from_values([1.0] * 5)).values) == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_cumulative_single_point():
    assert list(cumulative(Series.from_values([7.0])).values) == [0.0]


def test_cumulative_inverts_derivative():
    s = sampled(lambda t: t**2, 0.1, 41)
    recovered = cumulative(derivative(s, 1))
    assert np.allclose(recovered.values, s.values - s.values[0], atol=0.02)
    assert np.allclose(derivative(recovered, 1).values[1:-1], derivative(s, 1).values[1:-1], atol=0.06)


def test_events_to_json():
    events = [Event("MaxVG", 3, 0.3, {"gap": 0.0, "va_prime": 1.5}, ("consistent",), "work")]
    text = events_to_json(events)
    assert text.endswith("\n")
    assert json.loads(text) == [{
        "kind": "MaxVG", "tick": 3, "time": 0.3, "witness": {"gap": 0.0, "va_prime": 1.5},
        "flags": ["consistent"], "subject": "work",
    }]
    assert events_to_json([]) == "[]\n"
