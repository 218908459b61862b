import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symobs.benchmarks import get_benchmark
from symobs.errors import DivergenceDetected, InvalidBounds
from symobs.norm_estimation import LambdaSelection
from symobs.simulation import (
    BOUND_FLOOR,
    DEFAULT_DELTA,
    Scenario,
    Trajectory,
    build_rig,
    check_sine_envelope,
    integrate,
    limsup_error,
    within_bound,
)


def synthetic(t, err, x=None, vhat=None):
    t = np.asarray(t, dtype=float)
    n = t.size
    x = np.zeros((n, 2)) if x is None else np.asarray(x, dtype=float)
    vhat = np.zeros(n) if vhat is None else np.asarray(vhat, dtype=float)
    return Trajectory(t, x, x.copy(), x.copy(), np.zeros(n), vhat, np.asarray(err, dtype=float), np.zeros((n, 1)))


def test_limsup_of_constant_trace():
    t = np.linspace(0, 5, 51)
    assert limsup_error(synthetic(t, np.full(51, 0.25))) == 0.25


def test_limsup_of_decaying_trace():
    t = np.linspace(0, 10, 1001)
    assert limsup_error(synthetic(t, np.exp(-t)), 0.2) == pytest.approx(math.exp(-8), rel=1e-12)


def test_limsup_of_empty_trace_is_nan():
    assert math.isnan(limsup_error(synthetic([], [])))


def test_within_bound():
    assert within_bound(0.5, 1.0)
    assert not within_bound(2.0, 1.0)
    assert within_bound(0.5 * BOUND_FLOOR, 0.0)
    assert within_bound(1.0, None) is None
    assert not within_bound(math.nan, 1.0)


@pytest.mark.parametrize("kw", [dict(h0=0.0), dict(horizon=-1.0), dict(observer="kalman"),
                                dict(delta=1.0), dict(tail_fraction=0.0)])
def test_scenario_validation(kw):
    with pytest.raises((InvalidBounds, ValueError)):
        Scenario(**kw)


def test_default_delta_per_variant():
    assert Scenario(observer="semiglobal").contraction_delta == DEFAULT_DELTA["semiglobal"]
    assert Scenario(observer="partial").contraction_delta == DEFAULT_DELTA["partial"]
    assert Scenario(observer="partial", delta=0.3).contraction_delta == 0.3


def test_missing_design_is_reported():
    with pytest.raises(ValueError):
        build_rig(Scenario(benchmark="ex2", observer="semiglobal"))


def test_ex3_semiglobal_converges():
    traj = integrate(Scenario(benchmark="ex3", observer="semiglobal", horizon=10.0))
    assert not traj.diverged
    assert traj.info["limsup_error"] < 1e-3
    assert traj.info["max_xd_norm"] <= 1.0
    lengths = {len(traj.t), len(traj.x), len(traj.xhat), len(traj.chi), len(traj.p), len(traj.err)}
    assert lengths == {len(traj)}
    assert np.all(np.isfinite(np.hstack([traj.x, traj.xhat, traj.chi])))


def test_rk4_and_etd_agree_on_moderate_scenario():
    # A fixed small parameter keeps the filter non-stiff, so explicit RK4 is stable.
    base = dict(benchmark="ex3", observer="semiglobal", delta=0.5, p=1.0, horizon=2.0, h0=1e-3,
                x0=(0.3, 0.0), chi0=(0.1, 0.0))
    a = integrate(Scenario(integrator="etd", **base))
    b = integrate(Scenario(integrator="rk4", **base))
    np.testing.assert_allclose(a.xhat[-1], b.xhat[-1], atol=1e-6)


def test_finite_time_respects_guard():
    traj = integrate(Scenario(benchmark="ex2", observer="finite-time", horizon=1.0, x0=(3.0, -2.0)))
    assert traj.t[-1] == pytest.approx(1.0 - 1e-6, abs=1e-12)
    assert np.all(np.diff(traj.t) > 0)
    i = int(np.searchsorted(traj.t, 1.0 - 1e-3))
    assert traj.err[i] < 1e-8
    # Closer to the blow-up instant the output map amplifies rounding.
    assert np.isfinite(traj.err[-1])


def test_divergence_is_flagged_and_strict_raises():
    sc = Scenario(benchmark="ex3", observer="semiglobal", x0=(0.5, 0.0), disturbance="sinusoid",
                  amplitude=0.1, horizon=6.0)
    traj = integrate(sc)
    assert traj.diverged and traj.t[-1] < 6.0
    assert np.all(np.isfinite(traj.x))
    with pytest.raises(DivergenceDetected):
        integrate(sc, strict=True)


def test_noise_runs_are_reproducible():
    sc = Scenario(benchmark="ex3", observer="hgo", disturbance="noise", amplitude=0.05, seed=3, horizon=1.0,
                  x0=(0.2, 0.0))
    a, b = integrate(sc), integrate(sc)
    np.testing.assert_array_equal(a.xhat, b.xhat)


def test_envelope_holds_for_small_state():
    bench = get_benchmark("ex3")
    traj = integrate(Scenario(benchmark="ex3", observer="global", x0=(0.1, 0.0), horizon=3.0, h0=0.01))
    _, rig, _ = build_rig(Scenario(benchmark="ex3", observer="global"))
    rep = check_sine_envelope(traj, bench.sine, rig.selection, 1.0)
    assert rep["passed"] and rep["pre_settle_violations"] == 0


def test_envelope_allows_early_violations():
    bench = get_benchmark("ex3")
    t = np.linspace(0, 10, 101)
    x = np.column_stack([np.where(t < 1.0, 5.0, 0.0), np.zeros_like(t)])
    sel = LambdaSelection(1.0, 0.9, 0.5)
    rep = check_sine_envelope(synthetic(t, np.zeros_like(t), x=x), bench.sine, sel, 1.0)
    assert rep["pre_settle_violations"] > 0
    assert rep["passed"]


def test_envelope_reports_violations_without_margin():
    bench = get_benchmark("ex3")
    t = np.linspace(0, 1, 11)
    x = np.column_stack([np.full(11, 0.5), np.zeros(11)])
    sel = LambdaSelection(0.0, 0.9, 0.5)
    rep = check_sine_envelope(synthetic(t, np.zeros(11), x=x), bench.sine, sel, 0.0)
    assert not rep["passed"]
    assert rep["first_violation"]["t"] >= rep["settle_time"]


@given(st.floats(0.01, 1.0), st.floats(0.0, 1.0))
def test_limsup_bounds_tail(frac, scale):
    t = np.linspace(0, 1, 101)
    err = scale * (1.0 + np.sin(7 * t))
    tr = synthetic(t, err)
    got = limsup_error(tr, frac)
    assert got <= err.max() + 1e-15
    assert got >= err[-1]
