"""Fixed-step Runge-Kutta schemes.

``rk4_step`` is the classical scheme. ``EtdRk4`` is its exponential
variant (Cox and Matthews): a block ``L`` of the right-hand side is treated
exactly through matrix exponentials and the remainder ``N = f - L u`` with
the RK4 stage pattern. With ``L = 0`` it reproduces ``rk4_step`` exactly,
so non-stiff components are advanced by plain RK4.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

Rhs = Callable[[float, np.ndarray], np.ndarray]

# Above this norm of h*L the phi-functions are obtained from the recurrence
# phi_{k+1}(Z) = Z^{-1} (phi_k(Z) - I/k!) which is then free of cancellation.
_RECURRENCE_NORM = 4.0


def rk4_step(f: Rhs, t: float, u: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, u)
    k2 = f(t + 0.5 * h, u + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, u + 0.5 * h * k2)
    k4 = f(t + h, u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def phi_functions(z: np.ndarray):
    """``(e^Z, phi1(Z), phi2(Z), phi3(Z))`` for a square matrix ``Z``."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = z.shape[0]
    eye = np.eye(n)
    if np.linalg.norm(z, 1) > _RECURRENCE_NORM:
        e = expm(z)
        p1 = np.linalg.solve(z, e - eye)
        p2 = np.linalg.solve(z, p1 - eye)
        p3 = np.linalg.solve(z, p2 - 0.5 * eye)
        return e, p1, p2, p3
    # Augmented block exponential: the top row of exp([[Z, I, 0, 0], ...])
    # holds e^Z, phi1, phi2 and phi3.
    big = np.zeros((4 * n, 4 * n))
    big[:n, :n] = z
    for j in range(3):
        big[j * n:(j + 1) * n, (j + 1) * n:(j + 2) * n] = eye
    top = expm(big)[:n]
    return top[:, :n], top[:, n:2 * n], top[:, 2 * n:3 * n], top[:, 3 * n:]


class EtdRk4:
    """Exponential RK4 with a linear block acting on ``u[block]``.

    The coefficient matrices depend on ``(h, L)`` only and are cached, so
    fixed-step runs with a constant block pay for the exponentials once.
    """

    def __init__(self, block: Optional[slice] = None, cache_size: int = 64):
        self.block = block
        self._cache: dict = {}
        self._cache_size = cache_size

    def _coefficients(self, h: float, lin: np.ndarray):
        key = (h, lin.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        e, f1, f2, f3 = phi_functions(h * lin)
        e2, q1, _, _ = phi_functions(0.5 * h * lin)
        g1 = f1 - 3.0 * f2 + 4.0 * f3
        g2 = f2 - 2.0 * f3
        g3 = -f2 + 4.0 * f3
        coeffs = (e, e2, 0.5 * h * q1, h * g1, h * g2, h * g3)
        if len(self._cache) >= self._cache_size:
            self._cache.clear()
        self._cache[key] = coeffs
        return coeffs

    def step(self, f: Rhs, t: float, u: np.ndarray, h: float, lin: Optional[np.ndarray] = None) -> np.ndarray:
        if lin is None or self.block is None or not np.any(lin):
            return rk4_step(f, t, u, h)
        blk = self.block
        lin = np.atleast_2d(np.asarray(lin, dtype=float))
        e, e2, q, g1, g2, g3 = self._coefficients(h, lin)

        def nonlinear(s, v):
            out = f(s, v).copy()
            out[blk] -= lin @ v[blk]
            return out

        def half(v, nv):
            w = v + 0.5 * h * nv
            w[blk] = e2 @ v[blk] + q @ nv[blk]
            return w

        nu = nonlinear(t, u)
        a = half(u, nu)
        na = nonlinear(t + 0.5 * h, a)
        b = half(u, na)
        nb = nonlinear(t + 0.5 * h, b)
        c = half(a, 2.0 * nb - nu)
        nc = nonlinear(t + h, c)
        out = u + (h / 6.0) * (nu + 2.0 * (na + nb) + nc)
        out[blk] = e @ u[blk] + g1 @ nu[blk] + 2.0 * (g2 @ (na[blk] + nb[blk])) + g3 @ nc[blk]
        return out
