"""Diagonal non-contracting groups, contraction certificates and saturation.

A contraction certificate ``(sigma, mu, Gamma)`` promises that once the
group parameter exceeds ``sigma(||(x, d)||)`` the transformed state and input,
rescaled by the diagonal group ``Gamma_p``, lie inside the ball of radius
``mu(p)``. Partial certificates restrict the promise to an index subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _numerics as nm
from .errors import NonPositiveBound
from .transform_groups import GroupAction


def saturate(c: float, v):
    """Componentwise clamp of ``v`` to ``[-c, c]``."""
    if not c > 0:
        raise NonPositiveBound(f"saturation level must be positive, got {c}")
    if np.ndim(v) == 0:
        return float(min(max(float(v), -c), c))
    return np.clip(np.asarray(v, dtype=float), -c, c)


def _ones(n: int) -> Callable[[float], np.ndarray]:
    return lambda p: np.ones(n)


@dataclass(frozen=True)
class DiagonalGroup:
    """Diagonal scalings ``Gamma^x_p x Gamma^d_p`` stored by their diagonals.

    ``index_x`` and ``index_d`` select the certified components of the state
    and input. The diagonals have one entry per selected component.
    """

    gamma_x: Callable[[float], np.ndarray]
    gamma_d: Callable[[float], np.ndarray]
    index_x: tuple
    index_d: tuple

    @classmethod
    def identity(cls, n: int, m: int, index_x: Optional[Sequence[int]] = None,
                 index_d: Optional[Sequence[int]] = None) -> "DiagonalGroup":
        ix = tuple(range(n)) if index_x is None else tuple(index_x)
        idd = tuple(range(m)) if index_d is None else tuple(index_d)
        return cls(_ones(len(ix)), _ones(len(idd)), ix, idd)

    def scale(self, p: float, x, d) -> np.ndarray:
        """Stack ``Gamma^x_p x[index_x]`` and ``Gamma^d_p d[index_d]``."""
        x, d = nm.vec(x), nm.vec(d)
        gx = nm.vec(self.gamma_x(p)) * x[self.index_x,]
        if not self.index_d:
            return gx
        return np.concatenate([gx, nm.vec(self.gamma_d(p)) * d[self.index_d,]])

    def scale_x(self, p: float, xs) -> np.ndarray:
        """Apply ``Gamma^x_p`` to a vector holding only the certified components."""
        return nm.vec(self.gamma_x(p)) * nm.vec(xs)

    def check(self, p_grid: Sequence[float], tol: float = 1e-10) -> dict:
        """Identity, group law and monotonicity on a parameter grid."""
        grid = np.asarray(sorted(p_grid), dtype=float)

        def diag(p):
            return np.concatenate([nm.vec(self.gamma_x(p)), nm.vec(self.gamma_d(p)) if self.index_d else []])

        identity = float(np.max(np.abs(diag(0.0) - 1.0))) if diag(0.0).size else 0.0
        law = 0.0
        for p1 in grid:
            for p2 in grid:
                ref = diag(p1 + p2)
                law = max(law, float(np.max(np.abs(diag(p1) * diag(p2) - ref) / np.maximum(1.0, np.abs(ref)))))
        values = np.array([diag(p) for p in grid])
        monotone = bool(np.all(np.diff(values, axis=0) >= 0)) if values.size else True
        return {
            "identity": identity,
            "group_law": law,
            "monotone": monotone,
            "passed": identity < tol and law < tol and monotone,
        }


@dataclass(frozen=True)
class ContractionCertificate:
    sigma: Callable[[float], float]
    mu: Callable[[float], float]
    group: DiagonalGroup
    kind: str = "SI"
    sigma_inv: Optional[Callable[[float], float]] = None

    def check_functions(self, s_max: float = 20.0, n: int = 1000) -> dict:
        grid = np.linspace(0.0, s_max, n)
        sig = np.array([self.sigma(s) for s in grid])
        mu = np.array([self.mu(s) for s in grid])
        sigma_ok = abs(sig[0]) <= 1e-12 and bool(np.all(np.diff(sig) > 0))
        mu_ok = bool(np.all(mu > 0) and np.all(np.diff(mu) < 0) and mu[-1] < 1e-3 * mu[0])
        return {"sigma_k_inf": sigma_ok, "mu_class_l": mu_ok, "passed": sigma_ok and mu_ok}


@dataclass
class ContractionSample:
    lhs: float
    rhs: float
    satisfied: bool
    applicable: bool


def contraction_residual(cert: ContractionCertificate, action: GroupAction, p: float, t: float, x, d) -> ContractionSample:
    """Evaluate the contraction inequality at one point and parameter."""
    x, d = nm.vec(x), nm.vec(d)
    size = math.sqrt(float(x @ x + d @ d))
    # An empty output vector asks the domain test about (t, x, d) only.
    in_dom = bool(action.domain_test(p, t, x, d, np.zeros(0)))
    applicable = bool(p >= cert.sigma(size)) and in_dom
    if not in_dom:
        return ContractionSample(float("nan"), float(cert.mu(p)), False, False)
    xp = nm.vec(action.psi_x(p, t, x))
    dp = nm.vec(action.psi_d(p, t, x, d))
    scaled = cert.group.scale(p, xp, dp)
    lhs = math.sqrt(float(scaled @ scaled))
    rhs = float(cert.mu(p))
    return ContractionSample(lhs, rhs, bool(applicable and lhs <= rhs), applicable)


@dataclass
class SampleBox:
    """Axis-aligned sampling box for ``t``, ``x`` and ``d``."""

    t: tuple
    x: Sequence[tuple]
    d: Sequence[tuple]

    def sample(self, rng: np.random.Generator, count: int):
        ts = rng.uniform(self.t[0], self.t[1], size=count)
        xl = np.array([lo for lo, _ in self.x])
        xh = np.array([hi for _, hi in self.x])
        dl = np.array([lo for lo, _ in self.d])
        dh = np.array([hi for _, hi in self.d])
        xs = rng.uniform(xl, xh, size=(count, xl.size))
        ds = rng.uniform(dl, dh, size=(count, dl.size))
        return ts, xs, ds


@dataclass
class CertificateReport:
    applicable: int
    satisfied: int
    witnesses: list = field(default_factory=list)

    @property
    def fraction(self) -> float:
        return self.satisfied / self.applicable if self.applicable else 1.0

    @property
    def passed(self) -> bool:
        return self.applicable > 0 and self.satisfied == self.applicable


def verify_certificate(
    cert: ContractionCertificate,
    action: GroupAction,
    box: SampleBox,
    p_grid: Sequence[float],
    n_samples: int,
    seed: int = 0,
    max_witnesses: int = 10,
) -> CertificateReport:
    """Sweep the contraction inequality over random points and a parameter grid.

    Besides the grid values, each sample is also tested at the boundary
    parameter ``sigma(||(x, d)||)`` where the inequality is tightest.
    """
    rng = np.random.default_rng(seed)
    ts, xs, ds = box.sample(rng, n_samples)
    applicable = satisfied = 0
    witnesses = []
    for t, x, d in zip(ts, xs, ds):
        boundary = float(cert.sigma(math.sqrt(float(x @ x + d @ d))))
        for p in list(p_grid) + [boundary]:
            res = contraction_residual(cert, action, float(p), float(t), x, d)
            if not res.applicable:
                continue
            applicable += 1
            if res.satisfied:
                satisfied += 1
            elif len(witnesses) < max_witnesses:
                witnesses.append({"p": float(p), "t": float(t), "x": x.tolist(), "d": d.tolist(),
                                  "lhs": res.lhs, "rhs": res.rhs})
    return CertificateReport(applicable, satisfied, witnesses)


def non_contraction_holds(group: DiagonalGroup, p_grid: Sequence[float], xs, ds) -> bool:
    """``||(x, d)|| <= ||Gamma_p (x, d)||`` on the certified components for all ``p >= 0``."""
    for x, d in zip(xs, ds):
        base = np.linalg.norm(group.scale(0.0, x, d))
        for p in p_grid:
            if p >= 0 and np.linalg.norm(group.scale(p, x, d)) < base * (1 - 1e-14):
                return False
    return True
