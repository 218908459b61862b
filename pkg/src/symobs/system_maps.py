"""System maps ``Sigma = (x1 - F, y - H)`` and residuals of symmetry conditions.

A :class:`SystemMap` stores the right-hand side ``F(t, x, d)``, the output
map ``H(t, x, d)``, the linearization at the origin and the remainder
``Delta Sigma_L = (F; H) - [A B; C D] (x; d)``. Solutions of the system are
the zero set of ``Sigma`` once ``x1`` is read as the time derivative of ``x``.

The residual functions here check numerically whether a group maps this
zero set to itself (exact symmetry), or asymptotically onto the zero set of
a different map ``Sigma_inf`` (asymptotic and variational symmetry).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _numerics as nm
from .contraction import ContractionCertificate
from .transform_groups import GroupAction, Generator, apply, prolong_generator, prolong_point

MatrixFn = Callable[[float], np.ndarray]


def constant(matrix) -> MatrixFn:
    """Wrap a constant matrix as an evaluator of time."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    return lambda t: m


@dataclass(frozen=True)
class SystemMap:
    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    h: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    a: MatrixFn
    b: MatrixFn
    c: MatrixFn
    d: MatrixFn
    xi: Callable[[float], float]
    dims: tuple
    delta_l_fn: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
    f1: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    time_invariant: bool = True
    name: str = ""

    @property
    def n(self) -> int:
        return self.dims[0]

    @property
    def m(self) -> int:
        return self.dims[1]

    @property
    def p(self) -> int:
        return self.dims[2]

    def fh(self, t: float, x, d) -> np.ndarray:
        x, d = nm.vec(x), nm.vec(d)
        return np.concatenate([nm.vec(self.f(t, x, d)), nm.vec(self.h(t, x, d))])

    def delta_l(self, t: float, x, d) -> np.ndarray:
        """Remainder of the linearization, stacked as (state rows; output rows)."""
        x, d = nm.vec(x), nm.vec(d)
        if self.delta_l_fn is not None:
            return nm.vec(self.delta_l_fn(t, x, d))
        return self.fh(t, x, d) - self.linear_part(t, x, d)

    def linear_part(self, t: float, x, d) -> np.ndarray:
        x, d = nm.vec(x), nm.vec(d)
        top = self.a(t) @ x + self.b(t) @ d
        bottom = self.c(t) @ x + self.d(t) @ d
        return np.concatenate([top, bottom])

    def fh_jacobian(self, t: float, x, d, rel: float = nm.REL_STEP):
        """Jacobians of (F; H) with respect to t, x and d by central differences."""
        x, d = nm.vec(x), nm.vec(d)
        n = x.size
        jt = nm.vec(nm.derivative(lambda s: self.fh(s, x, d), t, rel))
        jz = nm.jacobian(lambda z: self.fh(t, z[:n], z[n:]), np.concatenate([x, d]), rel)
        return jt, jz[:, :n], jz[:, n:]

    def delta_l_jacobian(self, t: float, x, d, rel: float = nm.REL_STEP) -> np.ndarray:
        x, d = nm.vec(x), nm.vec(d)
        n = x.size
        return nm.jacobian(lambda z: self.delta_l(t, z[:n], z[n:]), np.concatenate([x, d]), rel)


@dataclass(frozen=True)
class AsymptoticPair:
    sigma_inf: SystemMap
    nu: Callable[[float, float], float]
    lam: Callable[[float, float], float]


def evaluate_sigma(smap: SystemMap, t: float, x, x1, d, y) -> np.ndarray:
    """``(x1 - F(t, x, d); y - H(t, x, d))``."""
    x, x1, d, y = nm.vec(x), nm.vec(x1), nm.vec(d), nm.vec(y)
    return np.concatenate([x1 - nm.vec(smap.f(t, x, d)), y - nm.vec(smap.h(t, x, d))])


def stacking_residual(smap: SystemMap, t: float, x, d) -> float:
    """``|| (F; H) - [A B; C D](x; d) - Delta Sigma_L ||``."""
    return float(np.linalg.norm(smap.fh(t, x, d) - smap.linear_part(t, x, d) - smap.delta_l(t, x, d)))


def lie_symmetry_residual(smap: SystemMap, gen: Generator, t: float, x, d, rel: float = nm.REL_STEP) -> float:
    """Norm of the Lie derivative of ``Sigma`` along the prolonged generator.

    The point is first placed on the solution manifold by ``x1 = F`` and
    ``y = H``. Because ``Sigma`` is affine in ``(x1, y)``, the derivative reads
    ``(g^{x1} - dF g; g^y - dH g)`` with ``dF g = F_t g^t + F_x g^x + F_d g^d``.
    """
    x, d = nm.vec(x), nm.vec(d)
    n = smap.n
    x1 = nm.vec(smap.f(t, x, d))
    y = nm.vec(smap.h(t, x, d))
    jt, jx, jd = smap.fh_jacobian(t, x, d, rel)
    gt = float(gen.g_t(t))
    gx = nm.vec(gen.g_x(t, x))
    gd = nm.vec(gen.g_d(t, x, d))
    gy = nm.vec(gen.g_y(t, y))
    gx1 = prolong_generator(gen, t, x, x1, rel)
    moved = jt * gt + jx @ gx + jd @ gd
    return float(np.linalg.norm(np.concatenate([gx1 - moved[:n], gy - moved[n:]])))


def transformed_manifold_point(smap: SystemMap, action: GroupAction, p: float, t: float, x, d):
    """Image of the manifold point ``(t, x, F, d, H)`` under the prolonged action."""
    x, d = nm.vec(x), nm.vec(d)
    x1 = nm.vec(smap.f(t, x, d))
    y = nm.vec(smap.h(t, x, d))
    tp, xp, dp, yp = apply(action, p, (t, x, d, y))
    _, x1p = prolong_point(action, p, t, x, x1)
    return tp, xp, x1p, dp, yp


def pushforward_residual(smap: SystemMap, action: GroupAction, p: float, t: float, x, d) -> float:
    """Norm of ``Sigma`` at the image of a manifold point; zero for a symmetry."""
    tp, xp, x1p, dp, yp = transformed_manifold_point(smap, action, p, t, x, d)
    return float(np.linalg.norm(evaluate_sigma(smap, tp, xp, x1p, dp, yp)))


def _gamma_norm(cert: ContractionCertificate, p: float, xp, dp) -> float:
    return float(np.linalg.norm(cert.group.scale(p, xp, dp)))


def asymptotic_residual(smap: SystemMap, pair: AsymptoticPair, action: GroupAction,
                        cert: ContractionCertificate, p: float, t: float, x, d):
    """``(||Delta Sigma_inf||, nu(||Gamma(x_p, d_p)||, p) ||(x_p, d_p)||)`` on the orbit."""
    tp, xp, x1p, dp, yp = transformed_manifold_point(smap, action, p, t, x, d)
    lhs = float(np.linalg.norm(evaluate_sigma(pair.sigma_inf, tp, xp, x1p, dp, yp)))
    r = _gamma_norm(cert, p, xp, dp)
    rhs = float(pair.nu(r, p)) * float(np.linalg.norm(np.concatenate([xp, dp])))
    return lhs, rhs


def delta_sigma_inf(smap: SystemMap, sigma_inf: SystemMap, action: GroupAction,
                    p: float, tp: float, xbar, ubar) -> np.ndarray:
    """``Delta Sigma_inf(p, t_p, xbar, ubar)``.

    The transformed point is pulled back by ``Psi_{-p}``, placed on the
    manifold of ``smap`` there, pushed forward again with its derivative and
    finally measured by ``sigma_inf``.
    """
    xbar, ubar = nm.vec(xbar), nm.vec(ubar)
    t = float(action.psi_t(-p, tp))
    x = nm.vec(action.psi_x(-p, tp, xbar))
    d = nm.vec(action.psi_d(-p, tp, xbar, ubar))
    x1 = nm.vec(smap.f(t, x, d))
    y = nm.vec(smap.h(t, x, d))
    _, x1p = prolong_point(action, p, t, x, x1)
    yp = nm.vec(action.psi_y(p, t, y))
    return evaluate_sigma(sigma_inf, tp, xbar, x1p, ubar, yp)


def variational_residual(smap: SystemMap, pair: AsymptoticPair, action: GroupAction,
                         cert: ContractionCertificate, p: float, t: float, x, d,
                         rel: float = nm.REL_STEP):
    """``(||d Delta Sigma_inf / d(xbar, ubar)||, lambda(||Gamma(x_p, d_p)||, p))``."""
    x, d = nm.vec(x), nm.vec(d)
    tp, xp, dp, _ = apply(action, p, (t, x, d, nm.vec(smap.h(t, x, d))))
    n = smap.n

    def g(z):
        return delta_sigma_inf(smap, pair.sigma_inf, action, p, tp, z[:n], z[n:])

    jac = nm.jacobian(g, np.concatenate([xp, dp]), rel)
    lhs = float(np.linalg.norm(jac, 2))
    rhs = float(pair.lam(_gamma_norm(cert, p, xp, dp), p))
    return lhs, rhs
