"""One-parameter transformation groups acting on (t, x, d, y).

A :class:`GroupAction` bundles the four component maps of a group element
``Psi_p``. The time map depends on ``(p, t)`` only; the state map on
``(p, t, x)``; the input map on ``(p, t, x, d)`` and the output map on
``(p, t, y)``. Every map receives a parameter ``p`` and returns the
transformed component, so the group laws can be checked pointwise:

* identity: ``Psi_0 = id``
* inversion: ``Psi_{-p} o Psi_p = id``
* composition: ``Psi_{p1} o Psi_{p2} = Psi_{p1 + p2}``

The infinitesimal generator is the ``p``-derivative of ``Psi_p`` at zero.
Its prolongation to first time derivatives, together with the prolongation
of the group elements themselves, is what turns a group acting on points
into a group acting on solutions of a differential system.

Derivatives that are not supplied analytically fall back to central finite
differences with step ``1e-6 * max(1, |argument|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import _numerics as nm
from .errors import DomainViolation, InconclusiveClassification, SingularTimeJacobian

Point = tuple  # (t, x, d, y)

TIME_JACOBIAN_TOL = 1e-14
LIMIT_THRESHOLD = 1e8
POLE_GROWTH = 100.0


def _always(*_args) -> bool:
    return True


def _infinite(_p: float) -> float:
    return math.inf


@dataclass(frozen=True)
class GroupAction:
    """A one-parameter group of transformations of the (t, x, d, y) space."""

    psi_t: Callable[[float, float], float]
    psi_x: Callable[[float, float, np.ndarray], np.ndarray]
    psi_d: Callable[[float, float, np.ndarray, np.ndarray], np.ndarray]
    psi_y: Callable[[float, float, np.ndarray], np.ndarray]
    dom_plus_t: Callable[[float], float] = _infinite
    domain_test: Callable[..., bool] = _always
    dpsi_t_dt: Optional[Callable[[float, float], float]] = None
    dpsi_x_dt: Optional[Callable[[float, float, np.ndarray], np.ndarray]] = None
    dpsi_x_dx: Optional[Callable[[float, float, np.ndarray], np.ndarray]] = None
    dpsi_x_inv_dx: Optional[Callable[[float, float, np.ndarray], np.ndarray]] = None
    name: str = ""

    # -- derivative evaluators with finite-difference fallback -----------------
    def time_jacobian(self, p: float, t: float, rel: float = nm.REL_STEP) -> float:
        """``dPsi^t_p / dt`` at ``t``."""
        if self.dpsi_t_dt is not None:
            return float(self.dpsi_t_dt(p, t))
        return float(nm.derivative(lambda s: self.psi_t(p, s), t, rel))

    def x_time_derivative(self, p: float, t: float, x, rel: float = nm.REL_STEP) -> np.ndarray:
        """``dPsi^x_p / dt`` at ``(t, x)``."""
        x = nm.vec(x)
        if self.dpsi_x_dt is not None:
            return nm.vec(self.dpsi_x_dt(p, t, x))
        return nm.vec(nm.derivative(lambda s: self.psi_x(p, s, x), t, rel))

    def x_jacobian(self, p: float, t: float, x, rel: float = nm.REL_STEP) -> np.ndarray:
        """``dPsi^x_p / dx`` at ``(t, x)``."""
        x = nm.vec(x)
        if self.dpsi_x_dx is not None:
            return np.atleast_2d(np.asarray(self.dpsi_x_dx(p, t, x), dtype=float))
        return nm.jacobian(lambda z: self.psi_x(p, t, z), x, rel)

    def x_inverse_jacobian(self, p: float, tp: float, xbar, rel: float = nm.REL_STEP) -> np.ndarray:
        """``dPsi^x_{-p} / dx`` evaluated at a transformed point ``(t_p, xbar)``."""
        xbar = nm.vec(xbar)
        if self.dpsi_x_inv_dx is not None:
            return np.atleast_2d(np.asarray(self.dpsi_x_inv_dx(p, tp, xbar), dtype=float))
        return self.x_jacobian(-p, tp, xbar, rel)


@dataclass(frozen=True)
class Regularity:
    """Growth constants of a generator: ``g_t(t) <= h t`` and related bounds."""

    h: float
    kappa: Optional[Callable[[float], float]] = None
    dgx0_sup: float = 0.0


@dataclass(frozen=True)
class Generator:
    """Infinitesimal generator ``(g^t, g^x, g^d, g^y)`` of a group action."""

    g_t: Callable[[float], float]
    g_x: Callable[[float, np.ndarray], np.ndarray]
    g_d: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    g_y: Callable[[float, np.ndarray], np.ndarray]
    regularity: Optional[Regularity] = None
    dgx_dx0: Optional[Callable[[float], np.ndarray]] = None

    def gx_jacobian(self, t: float, x, rel: float = nm.REL_STEP) -> np.ndarray:
        return nm.jacobian(lambda z: self.g_x(t, z), nm.vec(x), rel)

    def gx_linear_part(self, t: float, n: int) -> np.ndarray:
        """``dg^x/dx`` at ``x = 0``."""
        if self.dgx_dx0 is not None:
            return np.atleast_2d(np.asarray(self.dgx_dx0(t), dtype=float))
        return self.gx_jacobian(t, np.zeros(n))

    def check_regularity(self, t_grid: Iterable[float]) -> bool:
        if self.regularity is None:
            return True
        h = self.regularity.h
        return all(self.g_t(t) <= h * t + 1e-12 * max(1.0, abs(t)) for t in t_grid)


@dataclass
class TimeScaleClass:
    tag: str
    evidence: list = field(default_factory=list)


@dataclass
class GroupAxiomReport:
    identity: float
    inversion: float
    composition: float
    tol: float
    checked: int
    skipped: int

    @property
    def passed(self) -> bool:
        return max(self.identity, self.inversion, self.composition) < self.tol


# -- point maps ----------------------------------------------------------------


def in_domain(action: GroupAction, p: float, point: Point) -> bool:
    t, x, d, y = point
    return bool(action.domain_test(p, t, nm.vec(x), nm.vec(d), nm.vec(y)))


def apply(action: GroupAction, p: float, point: Point) -> Point:
    """Image of ``point = (t, x, d, y)`` under ``Psi_p``."""
    t, x, d, y = point
    x, d, y = nm.vec(x), nm.vec(d), nm.vec(y)
    if not action.domain_test(p, t, x, d, y):
        raise DomainViolation(f"point outside Dom(Psi_p) for p={p}")
    return (
        float(action.psi_t(p, t)),
        nm.vec(action.psi_x(p, t, x)),
        nm.vec(action.psi_d(p, t, x, d)),
        nm.vec(action.psi_y(p, t, y)),
    )


def prolong_point(action: GroupAction, p: float, t: float, x, x1, tol: float = TIME_JACOBIAN_TOL):
    """Transport a state and its time derivative through ``Psi_p``.

    Returns ``(x', x1')`` with ``x1' = (dPsi^t/dt)^-1 (dPsi^x/dt + dPsi^x/dx x1)``.
    """
    x, x1 = nm.vec(x), nm.vec(x1)
    if p == 0.0:
        return x.copy(), x1.copy()
    jt = action.time_jacobian(p, t)
    if not np.isfinite(jt) or abs(jt) < tol:
        raise SingularTimeJacobian(f"dPsi^t/dt = {jt} at p={p}, t={t}")
    xt = action.x_time_derivative(p, t, x)
    jx = action.x_jacobian(p, t, x)
    return nm.vec(action.psi_x(p, t, x)), (xt + jx @ x1) / jt


def prolong_generator(gen: Generator, t: float, x, x1, rel: float = nm.REL_STEP) -> np.ndarray:
    """First prolongation of a generator acting on the derivative coordinates."""
    x, x1 = nm.vec(x), nm.vec(x1)
    gx_x = gen.gx_jacobian(t, x, rel)
    gx_t = nm.vec(nm.derivative(lambda s: gen.g_x(s, x), t, rel))
    gt_t = float(nm.derivative(gen.g_t, t, rel))
    return gx_x @ x1 + gx_t - gt_t * x1


def generator_from_action(action: GroupAction, t: float, point: Point, h: float = 1e-4) -> Point:
    """Central difference in ``p`` of the action at ``p = 0``."""
    plus = apply(action, h, point)
    minus = apply(action, -h, point)
    return tuple(
        (np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) / (2.0 * h) for a, b in zip(plus, minus)
    )


def generator_residual(action: GroupAction, gen: Generator, point: Point, h: float = 1e-4) -> float:
    """``|| (Psi_h - Psi_-h)/(2h) - g ||`` at ``point``."""
    t, x, d, y = point
    x, d, y = nm.vec(x), nm.vec(d), nm.vec(y)
    num = generator_from_action(action, t, (t, x, d, y), h)
    ana = (gen.g_t(t), gen.g_x(t, x), gen.g_d(t, x, d), gen.g_y(t, y))
    return float(
        max(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))) for a, b in zip(num, ana))
    )


def _diff(a: Point, b: Point) -> float:
    worst = 0.0
    for u, v in zip(a, b):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        worst = max(worst, float(np.max(np.abs(u - v) / np.maximum(1.0, np.abs(v)))))
    return worst


def check_group_axioms(
    action: GroupAction,
    samples: Iterable[Point],
    p_pairs: Iterable[tuple],
    tol: float = 1e-8,
) -> GroupAxiomReport:
    """Largest identity, inversion and composition residuals over ``samples``.

    Residuals are measured componentwise relative to ``max(1, |reference|)``.
    Points outside the domain of any involved group element are skipped and
    counted rather than reported as failures.
    """
    samples = list(samples)
    p_pairs = list(p_pairs)
    ident = inv = comp = 0.0
    checked = skipped = 0
    for pt in samples:
        pt = (float(pt[0]), nm.vec(pt[1]), nm.vec(pt[2]), nm.vec(pt[3]))
        if in_domain(action, 0.0, pt):
            ident = max(ident, _diff(apply(action, 0.0, pt), pt))
        for p1, p2 in p_pairs:
            for p in (p1, p2):
                if not in_domain(action, p, pt):
                    skipped += 1
                    continue
                img = apply(action, p, pt)
                if not in_domain(action, -p, img):
                    skipped += 1
                    continue
                inv = max(inv, _diff(apply(action, -p, img), pt))
                checked += 1
            if not (in_domain(action, p2, pt) and in_domain(action, p1 + p2, pt)):
                skipped += 1
                continue
            mid = apply(action, p2, pt)
            if not in_domain(action, p1, mid):
                skipped += 1
                continue
            comp = max(comp, _diff(apply(action, p1, mid), apply(action, p1 + p2, pt)))
            checked += 1
    return GroupAxiomReport(ident, inv, comp, tol, checked, skipped)


def classify_time_scale(action: GroupAction, p_grid: Sequence[float], horizon: float) -> TimeScaleClass:
    """Classify the time-scale behavior of ``Psi^t`` as UU, BU, CBU or Other.

    ``Dom+`` values come from the action; only the limits are probed. A value
    above ``1e8`` (at ``horizon`` for unbounded domains, or just below
    ``Dom+`` otherwise) counts as evidence of divergence, as does growth by
    more than a factor 100 between probes at relative distances ``1e-9``
    and ``1e-12`` from ``Dom+``. CBU additionally
    requires ``Dom+`` to decay like a power of ``p`` along the tail of the
    grid (log-log slope below -1/2).
    """
    grid = np.asarray(sorted(float(p) for p in p_grid))
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("p_grid must be non-empty and strictly positive")
    evidence = []
    finite = []
    for p in grid:
        dom = float(action.dom_plus_t(p))
        if math.isinf(dom):
            limit = float(action.psi_t(p, horizon))
        else:
            limit = float(action.psi_t(p, dom * (1.0 - 1e-12)))
            coarse = float(action.psi_t(p, dom * (1.0 - 1e-9)))
            # A pole grows like 1/(Dom+ - t): a thousandfold closer probe
            # gives a value about a thousand times larger.
            if abs(limit) > POLE_GROWTH * max(abs(coarse), 1.0):
                limit = math.copysign(math.inf, limit)
        evidence.append((float(p), dom, limit))
        finite.append(math.isfinite(dom))
    if any(finite) and not all(finite):
        raise InconclusiveClassification("Dom+ is finite for some parameters and infinite for others")
    diverges = [abs(lim) > LIMIT_THRESHOLD for _, _, lim in evidence]
    if not all(finite):
        tag = "UU" if all(diverges) else "Other"
        return TimeScaleClass(tag, evidence)
    doms = np.array([e[1] for e in evidence])
    if not all(diverges) or np.any(doms <= 0):
        if any(diverges):
            raise InconclusiveClassification("limit at Dom+ diverges only for part of the grid")
        return TimeScaleClass("Other", evidence)
    tag = "BU"
    if grid.size >= 4 and np.all(np.diff(doms) < 0):
        half = grid.size // 2
        slope = np.polyfit(np.log(grid[half:]), np.log(doms[half:]), 1)[0]
        if slope < -0.5:
            tag = "CBU"
    return TimeScaleClass(tag, evidence)
