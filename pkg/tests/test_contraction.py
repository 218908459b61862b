import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from symobs.benchmarks import bench_e8, bench_ex1, bench_ex3
from symobs.contraction import (
    ContractionCertificate,
    DiagonalGroup,
    SampleBox,
    contraction_residual,
    non_contraction_holds,
    saturate,
    verify_certificate,
)
from symobs.errors import NonPositiveBound


def test_saturate_values():
    assert saturate(1.0, 0.5) == 0.5
    assert saturate(1.0, 3.0) == 1.0
    np.testing.assert_array_equal(saturate(2.0, np.array([-5.0, 0.3])), [-2.0, 0.3])


@pytest.mark.parametrize("c", [0.0, -1.0])
def test_saturate_rejects_nonpositive_level(c):
    with pytest.raises(NonPositiveBound):
        saturate(c, 1.0)


vecs = arrays(np.float64, 3, elements=st.floats(-1e3, 1e3))


@given(st.floats(1e-3, 1e2), vecs, vecs)
def test_saturate_is_one_lipschitz(c, u, v):
    assert np.all(np.abs(saturate(c, u) - saturate(c, v)) <= np.abs(u - v) + 1e-12)


@given(st.floats(1e-3, 1e2), vecs)
def test_saturate_is_idempotent_and_bounded(c, u):
    s = saturate(c, u)
    assert np.all(np.abs(s) <= c)
    np.testing.assert_array_equal(saturate(c, s), s)


def test_identity_group_checks():
    grp = DiagonalGroup.identity(2, 1)
    rep = grp.check([0.0, 0.5, 1.0, 2.0])
    assert rep["passed"]
    np.testing.assert_array_equal(grp.scale(3.0, [1.0, 2.0], [3.0]), [1.0, 2.0, 3.0])


def test_e8_group_law():
    cert = bench_e8().symmetry("asymptotic").certificate(0.5)
    assert cert.group.check([0.0, 0.25, 0.5, 1.0])["passed"]


def test_decreasing_diagonal_is_not_monotone():
    grp = DiagonalGroup(lambda p: np.array([math.exp(-p)]), lambda p: np.ones(0), (0,), ())
    assert not grp.check([0.0, 1.0])["monotone"]


@pytest.mark.parametrize("delta", [0.2, 0.5, 0.9])
def test_ex3_certificate_holds(delta):
    bench = bench_ex3(2)
    entry = bench.symmetry("dilation")
    cert = entry.certificate(delta)
    assert cert.check_functions(s_max=100.0)["passed"]
    rep = verify_certificate(cert, entry.action, entry.box, entry.p_grid, 200, seed=1)
    assert rep.passed and rep.applicable > 0


def test_ex1_partial_certificate_holds():
    entry = bench_ex1().symmetry("global")
    cert = entry.certificate(0.5)
    assert cert.kind == "PSI"
    rep = verify_certificate(cert, entry.action, entry.box, entry.p_grid, 200, seed=2)
    assert rep.passed


def test_shrunk_mu_produces_witnesses():
    entry = bench_ex3(2).symmetry("dilation")
    good = entry.certificate(0.5)
    bad = ContractionCertificate(good.sigma, lambda s: good.mu(s) / 10.0, good.group, good.kind)
    rep = verify_certificate(bad, entry.action, entry.box, entry.p_grid, 100, seed=3)
    assert not rep.passed
    assert rep.witnesses
    w = rep.witnesses[0]
    assert w["lhs"] > w["rhs"]


def test_residual_below_sigma_is_not_applicable():
    entry = bench_ex3(2).symmetry("dilation")
    cert = entry.certificate(0.5)
    res = contraction_residual(cert, entry.action, 0.0, 0.0, [2.0, 2.0], [1.0])
    assert not res.applicable


def test_sample_box_is_reproducible():
    box = SampleBox((0.0, 1.0), [(-1.0, 1.0), (0.0, 2.0)], [(-0.5, 0.5)])
    a = box.sample(np.random.default_rng(9), 5)
    b = box.sample(np.random.default_rng(9), 5)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)
    assert np.all((a[1][:, 1] >= 0.0) & (a[1][:, 1] <= 2.0))


def test_non_contraction():
    grow = DiagonalGroup(lambda p: np.array([1.0, math.exp(p)]), lambda p: np.array([1.0]), (0, 1), (0,))
    shrink = DiagonalGroup(lambda p: np.array([math.exp(-p)]), lambda p: np.ones(0), (0,), ())
    xs, ds = [np.array([1.0, 1.0])], [np.array([1.0])]
    assert non_contraction_holds(grow, [0.0, 1.0, 2.0], xs, ds)
    assert not non_contraction_holds(shrink, [0.0, 1.0], xs, ds)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1), st.floats(0, 3))
def test_ex3_contraction_at_boundary(delta, a, b, d, extra):
    entry = bench_ex3(2).symmetry("dilation")
    cert = entry.certificate(delta)
    size = float(np.linalg.norm([a, b, d]))
    p = float(cert.sigma(size)) + extra
    res = contraction_residual(cert, entry.action, p, 1.0, [a, b], [d])
    assert res.applicable
    assert res.lhs <= res.rhs * (1 + 1e-9)
