"""Small numerical helpers: finite differences, grid class checks, norms."""

from __future__ import annotations

from typing import Callable

import numpy as np

REL_STEP = 1e-6


def fd_step(value: float, rel: float = REL_STEP) -> float:
    return rel * max(1.0, abs(float(value)))


def derivative(f: Callable[[float], np.ndarray], s: float, rel: float = REL_STEP):
    """Central difference of a scalar- or vector-valued function of one real."""
    h = fd_step(s, rel)
    return (np.asarray(f(s + h), dtype=float) - np.asarray(f(s - h), dtype=float)) / (2.0 * h)


def jacobian(f: Callable[[np.ndarray], np.ndarray], x, rel: float = REL_STEP) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x`` (columns follow ``x``)."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = fd_step(x[j], rel)
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.atleast_1d(f(xp)) - np.atleast_1d(f(xm))) / (2.0 * h)
    return jac


def vec(v) -> np.ndarray:
    # Hot path: float arrays pass through untouched, as asarray would leave them.
    if type(v) is np.ndarray and v.dtype == np.float64 and v.ndim:
        return v
    return np.atleast_1d(np.asarray(v, dtype=float))


def is_increasing(values, strict: bool = True) -> bool:
    diffs = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(diffs > 0)) if strict else bool(np.all(diffs >= 0))


def is_class_k(f: Callable[[float], float], s_max: float = 10.0, n: int = 1000) -> bool:
    """Grid falsification of membership in class K: f(0)=0 and strictly increasing."""
    grid = np.linspace(0.0, s_max, n)
    vals = np.array([f(s) for s in grid])
    return bool(abs(vals[0]) <= 1e-12 and np.all(np.diff(vals) > 0))


def is_class_k_plus(f: Callable[[float], float], s_max: float = 10.0, n: int = 1000) -> bool:
    """Positive at zero and strictly increasing on the grid."""
    grid = np.linspace(0.0, s_max, n)
    vals = np.array([f(s) for s in grid])
    return bool(vals[0] > 0 and np.all(np.diff(vals) > 0))


def is_class_l(f: Callable[[float], float], s_max: float = 50.0, n: int = 1000, tail: float = 1e-3) -> bool:
    """Positive, non-increasing, with the last grid value below ``tail`` times the first."""
    grid = np.linspace(0.0, s_max, n)
    vals = np.array([f(s) for s in grid])
    return bool(np.all(vals > 0) and np.all(np.diff(vals) <= 0) and vals[-1] <= tail * vals[0])
