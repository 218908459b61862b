import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symobs.benchmarks import bench_e8, bench_ex1, bench_ex2, bench_ex3, spow
from symobs.system_maps import (
    asymptotic_residual,
    evaluate_sigma,
    lie_symmetry_residual,
    pushforward_residual,
    stacking_residual,
    variational_residual,
)
from symobs.transform_groups import Generator

coords = st.floats(-2, 2)


def test_ex1_vector_field():
    np.testing.assert_allclose(bench_ex1().smap.f(0.0, np.array([1.0, 2.0]), np.array([3.0])), [2.0, 7.0])


def test_signed_power():
    assert spow(-4.0, 0.5) == pytest.approx(-2.0)
    assert spow(9.0, 0.5) == pytest.approx(3.0)
    assert spow(0.0, 0.5) == 0.0


def test_evaluate_sigma_on_manifold():
    smap = bench_ex3(2).smap
    assert np.all(evaluate_sigma(smap, 0.0, [1.0, 2.0], [2.0, 8.0], [3.0], [1.0]) == 0.0)


def test_evaluate_sigma_off_manifold():
    smap = bench_ex3(2).smap
    np.testing.assert_allclose(evaluate_sigma(smap, 0.0, [1.0, 2.0], [2.0, 0.0], [3.0], [1.0]), [0.0, -8.0, 0.0])


@pytest.mark.parametrize("bench", [bench_ex1(), bench_ex2(), bench_ex3(2), bench_ex3(3)], ids=lambda b: b.name)
def test_stacking_identity(bench):
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, d = rng.uniform(-3, 3, 2), rng.uniform(-2, 2, 1)
        assert stacking_residual(bench.smap, rng.uniform(0, 5), x, d) < 1e-12


@pytest.mark.parametrize("make", [bench_ex1, bench_ex2, lambda: bench_ex3(2), lambda: bench_ex3(3)])
def test_lie_residual_vanishes_for_shipped_symmetries(make):
    bench = make()
    rng = np.random.default_rng(1)
    for entry in bench.symmetries:
        for _ in range(20):
            t = rng.uniform(0, 0.9)
            x, d = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 1)
            assert lie_symmetry_residual(bench.smap, entry.generator, t, x, d) < 1e-5


def test_lie_residual_detects_mutated_generator():
    bench = bench_ex3(2)
    gen = bench.symmetry("dilation").generator

    def g_x(t, x):
        out = np.array(gen.g_x(t, x), dtype=float)
        out[1] *= 1.1
        return out

    bad = Generator(gen.g_t, g_x, gen.g_d, gen.g_y)
    assert lie_symmetry_residual(bench.smap, bad, 0.5, np.array([0.7, 1.3]), np.array([0.2])) > 1e-3


@settings(max_examples=60, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(0, 3), coords, coords, st.floats(-1, 1))
def test_ex3_pushforward_invariance(p, t, a, b, d):
    bench = bench_ex3(2)
    action = bench.symmetry("dilation").action
    res = pushforward_residual(bench.smap, action, p, t, [a, b], [d])
    scale = 1.0 + float(np.linalg.norm(bench.smap.f(t, np.array([a, b]), np.array([d]))))
    assert res <= 1e-8 * scale * math.exp(3 * abs(p))


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2), st.floats(0, 0.45), coords, coords, st.floats(-1, 1))
def test_ex2_pushforward_invariance(p, t, a, b, d):
    bench = bench_ex2()
    action = bench.symmetry("cbu").action
    if t >= action.dom_plus_t(p) * 0.9:
        return
    assert pushforward_residual(bench.smap, action, p, t, [a, b], [d]) < 1e-6


def test_ex2_generator_closed_form():
    gen = bench_ex2().symmetry("cbu").generator
    t, x, d, y = 0.7, np.array([1.5, -0.5]), np.array([2.0]), np.array([0.4])
    np.testing.assert_allclose(gen.g_x(t, x), np.array([[t, 0.0], [1.0, -t]]) @ x)
    np.testing.assert_allclose(gen.g_d(t, x, d), -3.0 * t * d)
    np.testing.assert_allclose(gen.g_y(t, y), t * y)
    assert bench_ex2().symmetry("cbu").action.dom_plus_t(0.5) == pytest.approx(2.0)


def test_ex3_input_map_at_unit_parameter():
    action = bench_ex3(2).symmetry("dilation").action
    d = np.array([0.8])
    np.testing.assert_allclose(action.psi_d(1.0, 0.0, np.array([0.0, 0.3]), d), math.exp(-3) * math.exp(-2) * d)


def test_e8_asymptotic_bounds():
    bench = bench_e8(2, 6.0)
    entry = bench.symmetry("asymptotic")
    cert = entry.certificate(0.5)
    rng = np.random.default_rng(2)
    for _ in range(30):
        x, d = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 1)
        p = float(cert.sigma(np.linalg.norm(np.concatenate([x, d])))) + rng.uniform(0, 2)
        lhs, rhs = asymptotic_residual(bench.smap, bench.asymptotic, entry.action, cert, p, 0.5, x, d)
        assert lhs <= rhs * (1 + 1e-6) + 1e-12
        vlhs, vrhs = variational_residual(bench.smap, bench.asymptotic, entry.action, cert, p, 0.5, x, d)
        assert vlhs <= vrhs * (1 + 1e-4) + 1e-6


def test_e8_target_map_is_linear():
    sig = bench_e8().asymptotic.sigma_inf
    assert np.all(sig.b(0.0) == 0.0) and np.all(sig.d(0.0) == 0.0)
    assert stacking_residual(sig, 0.0, [1.0, 2.0], [3.0]) == 0.0
