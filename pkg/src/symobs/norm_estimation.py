"""State-input norm estimators and the group-parameter schedule they drive.

A norm estimator is a scalar filter

    dV/dt = max(-lambda1 alpha(V) + Phi(|y| + N), 0)

whose state eventually dominates a Lyapunov-like function ``V(t, x(t))`` of
the unmeasured plant state. Composing it with the contraction map ``sigma``
gives the time-varying parameter ``p(t)`` used by the global observer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from . import _numerics as nm
from .errors import InvalidBounds, NoFeasibleSelection


@dataclass(frozen=True)
class SineData:
    v: Callable[[float, np.ndarray], float]
    alpha: Callable[[float], float]
    phi: Callable[[float], float]
    beta1: Callable[[float], float]
    beta0: float
    eta: Callable[[float], float]
    constants: Optional[dict] = None


@dataclass(frozen=True)
class LambdaSelection:
    omega1: float
    lambda1: float
    lambda0: float
    margin: float = 0.0


@dataclass(frozen=True)
class PSchedule:
    sigma: Callable[[float], float]
    omega0: float
    n_bound: float
    beta1: Callable[[float], float]
    omega1: float
    lambda1: float
    alpha: Callable[[float], float]
    phi: Callable[[float], float]
    vhat0: float = 0.0
    p_max: float = math.inf
    beta0: float = 0.0

    def __post_init__(self):
        if self.vhat0 < 0:
            raise InvalidBounds("vhat0 must be non-negative")


def sine_filter_rhs(sel: LambdaSelection, data: SineData, vhat: float, y_norm: float, n_bound: float) -> float:
    """Right-hand side of the non-negative norm-estimator filter."""
    return max(-sel.lambda1 * data.alpha(vhat) + data.phi(y_norm + n_bound), 0.0)


def select_lambda(alpha: Callable[[float], float], omega1: float, s_max: float = 100.0,
                  grid_n: int = 20001, min_margin: float = 1e-6) -> LambdaSelection:
    """Largest ``lambda1`` in {0.9, 0.8, ..., 0.1} with a positive design margin.

    The margin is ``min_s alpha(s + omega1) - lambda1 alpha(s)`` over a dense
    grid of ``[0, s_max]``; ``lambda0`` is half of it. Margins below
    ``min_margin`` are treated as infeasible, which rejects selections whose
    settle time would be numerically meaningless.
    """
    if not omega1 > 0:
        raise NoFeasibleSelection("omega1 must be positive")
    grid = np.linspace(0.0, s_max, grid_n)
    shifted = np.array([alpha(s + omega1) for s in grid])
    base = np.array([alpha(s) for s in grid])
    a_omega = alpha(omega1)
    for tenth in range(9, 0, -1):
        lam1 = tenth / 10.0
        margin = float(np.min(shifted - lam1 * base))
        lam0 = 0.5 * margin
        if margin > min_margin and 0.0 < lam0 < a_omega:
            if np.all(shifted >= lam1 * base + lam0):
                return LambdaSelection(omega1, lam1, lam0, margin)
    raise NoFeasibleSelection(f"no lambda1 on the grid gives a margin above {min_margin} for omega1={omega1}")


def settle_time(data: Optional[SineData], sel: LambdaSelection, v0: float) -> float:
    """Time after which the estimator dominates ``V``: ``(v0 + omega1) / lambda0``."""
    return (v0 + sel.omega1) / sel.lambda0


def p_of_t(sched: PSchedule, vhat: float) -> float:
    """``sigma(omega0 + N + beta1(vhat + omega1) + beta0)``, clipped at ``p_max``."""
    with np.errstate(over="ignore"):
        try:
            arg = sched.omega0 + sched.n_bound + sched.beta1(vhat + sched.omega1) + sched.beta0
            value = float(sched.sigma(arg))
        except OverflowError:
            value = math.inf
    return min(value, sched.p_max)


def dp_dvhat(sched: PSchedule, vhat: float) -> float:
    """Derivative of the schedule with respect to the filter state.

    Zero once the cap is active. Central differences otherwise.
    """
    if p_of_t(sched, vhat) >= sched.p_max:
        return 0.0
    uncapped = replace(sched, p_max=math.inf)
    h = nm.fd_step(vhat)
    lo = max(vhat - h, 0.0)
    return (p_of_t(uncapped, vhat + h) - p_of_t(uncapped, lo)) / (vhat + h - lo)


def lyapunov_q(a_l, k_l, c_l) -> np.ndarray:
    """Solution ``Q`` of ``(A - K C)^T Q + Q (A - K C) = -2 I``."""
    m = np.asarray(a_l, dtype=float) - np.asarray(k_l, dtype=float) @ np.asarray(c_l, dtype=float)
    q = solve_continuous_lyapunov(m.T, -2.0 * np.eye(m.shape[0]))
    return 0.5 * (q + q.T)


def build_sine_for_triangular(q, ell1: float, ell2: float, tau: Callable[[float], float],
                              w: Optional[Callable[[float, np.ndarray], float]] = None) -> SineData:
    """Norm estimator of the log-quadratic type.

    ``V = ln(1 + W)``, ``alpha = ell1 s/(1+s)``, ``Phi = ell2 (1+tau(s))(1+s^2)``,
    ``beta1 = (e^s - 1)/q_min`` and ``eta(s) = ell2 (1+tau(0)) ((1+tau(s))(1+s^2) - tau(0))``.
    ``W`` defaults to ``x^T Q x``.

    Since ``W >= q_min |x|^2`` only gives ``|x| <= sqrt(beta1(V))``, the
    offset ``beta0 = 1/4`` is added: ``sqrt(u) <= u + 1/4`` for every
    ``u >= 0``, so ``|x| <= beta1(V) + beta0`` holds also for small states.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    eig = np.linalg.eigvalsh(0.5 * (q + q.T))
    q_lo, q_hi = float(eig[0]), float(eig[-1])
    if not (ell1 > 0 and ell2 > 0):
        raise InvalidBounds("ell1 and ell2 must be positive")
    if not (0 < q_lo <= q_hi):
        raise InvalidBounds("Q must be positive definite")
    if w is None:
        def w(t, x, q=q):
            x = nm.vec(x)
            return float(x @ q @ x)
    tau0 = tau(0.0)

    def v(t, x):
        return math.log1p(w(t, x))

    def alpha(s):
        return ell1 * s / (1.0 + s)

    def phi(s):
        return ell2 * (1.0 + tau(s)) * (1.0 + s * s)

    def beta1(s):
        return math.expm1(s) / q_lo

    def eta(s):
        return ell2 * (1.0 + tau0) * ((1.0 + tau(s)) * (1.0 + s * s) - tau0)

    return SineData(v, alpha, phi, beta1, 0.25, eta,
                    {"q_min": q_lo, "q_max": q_hi, "ell1": ell1, "ell2": ell2, "q": q})
