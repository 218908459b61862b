import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symobs.integrators import EtdRk4, phi_functions, rk4_step


def decay(t, u):
    return -u


def run(step, h, t_end=1.0, u0=1.0):
    u, t = np.array([u0]), 0.0
    for _ in range(int(round(t_end / h))):
        u = step(decay, t, u, h)
        t += h
    return u[0]


def test_rk4_exponential_decay():
    assert run(rk4_step, 0.01) == pytest.approx(math.exp(-1), abs=1e-6)


def test_rk4_is_fourth_order():
    e1 = abs(run(rk4_step, 0.1) - math.exp(-1))
    e2 = abs(run(rk4_step, 0.05) - math.exp(-1))
    assert 12 < e1 / e2 < 20


@given(st.floats(-50, 0.5))
def test_phi_functions_match_definitions(z):
    _, p1, p2, p3 = (float(np.asarray(v).ravel()[0]) for v in phi_functions(np.array([[z]])))
    if abs(z) < 1e-3:
        ref = (1.0, 0.5, 1.0 / 6.0)
        tol = 1e-3
    else:
        e = math.exp(z)
        ref = ((e - 1) / z, (e - 1 - z) / z ** 2, (e - 1 - z - z * z / 2) / z ** 3)
        tol = 1e-8
    for got, want in zip((p1, p2, p3), ref):
        assert got == pytest.approx(want, rel=tol, abs=1e-12)


def test_etd_exact_for_linear_problem():
    lam = np.array([[-50.0]])
    etd = EtdRk4(block=slice(0, 1))
    u = np.array([1.0])
    for i in range(10):
        u = etd.step(lambda t, v: lam @ v, 0.1 * i, u, 0.1, lam)
    assert u[0] == pytest.approx(math.exp(-50.0), rel=1e-8, abs=0)


def test_etd_forced_stiff_problem():
    # u' = -100 (u - cos t) - sin t has the solution u = cos t.
    lam = np.array([[-100.0]])
    etd = EtdRk4(block=slice(0, 1))

    def f(t, v):
        return lam @ v + 100.0 * math.cos(t) - math.sin(t)

    u, h = np.array([1.0]), 0.05
    for i in range(40):
        u = etd.step(f, i * h, u, h, lam)
    assert u[0] == pytest.approx(math.cos(2.0), abs=1e-6)


def test_etd_without_linear_part_is_rk4():
    u = np.array([0.7, -0.2])
    f = lambda t, v: np.array([v[1], -v[0]])
    np.testing.assert_allclose(EtdRk4(block=slice(0, 2)).step(f, 0.0, u, 0.1), rk4_step(f, 0.0, u, 0.1))


def test_etd_block_leaves_other_components_to_rk4():
    lam = np.array([[-2.0]])
    f = lambda t, v: np.array([-2.0 * v[0], v[0]])
    u = EtdRk4(block=slice(0, 1)).step(f, 0.0, np.array([1.0, 0.0]), 0.1, lam)
    assert u[0] == pytest.approx(math.exp(-0.2), rel=1e-12)
    assert u[1] == pytest.approx(0.5 * (1 - math.exp(-0.2)), rel=1e-4)
