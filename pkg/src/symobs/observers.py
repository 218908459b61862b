"""Symmetry-based observers, two classical baselines, tuning and error bounds.

Every symmetry-based observer runs a Luenberger-type filter ``chi`` in the
coordinates produced by the group element ``Psi_p`` and maps the saturated
filter state back with ``Psi_{-p}``. The variants differ in how ``p`` is
chosen and in which terms enter the filter:

``semiglobal``
    constant ``p`` from :func:`tune_p`.
``partial``
    constant ``p``; the measured block is taken from the output directly.
``global``
    ``p(t)`` driven by a norm estimator, with generator corrections for
    the time variation of ``p``. Can be combined with the partial structure.
``finite_time``
    linear time-varying systems and a group whose time map blows up at
    ``Dom+``; the error vanishes at that instant.
``avs``
    the filter is designed for the limit system of an asymptotic symmetry.
``hgo``, ``slo``
    high-gain and sliding-mode baselines acting on the original coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import solve_continuous_lyapunov
from scipy.signal import place_poles

from . import _numerics as nm
from .contraction import ContractionCertificate, saturate
from .errors import InvalidBounds, PastBlowup, SingularTimeJacobian, TuningDiverged, UnstabilizablePair
from .norm_estimation import LambdaSelection, PSchedule, SineData, dp_dvhat, p_of_t, sine_filter_rhs
from .system_maps import AsymptoticPair, SystemMap, delta_sigma_inf
from .transform_groups import TIME_JACOBIAN_TOL, Generator, GroupAction

VARIANTS = ("semiglobal", "partial", "global", "finite_time", "avs", "hgo", "slo")

# Integration stops this far before the blow-up instant of the time map.
BLOWUP_GUARD = 1e-6


# -- gains ------------------------------------------------------------------------


@dataclass(frozen=True)
class GainSchedule:
    k: Callable[[float], np.ndarray]
    p_mat: Callable[[float], np.ndarray]
    p_lower: float
    p_upper: float
    sup_k: float
    sup_b: float
    sup_d: float
    a: Callable[[float], np.ndarray]
    c: Callable[[float], np.ndarray]

    def lyapunov_residual(self, t: float) -> float:
        """Largest eigenvalue of ``P (A - K C) + (A - K C)^T P + 2 I`` (``P`` is constant)."""
        m = self.a(t) - self.k(t) @ self.c(t)
        p = self.p_mat(t)
        s = p @ m + m.T @ p + 2.0 * np.eye(m.shape[0])
        return float(np.max(np.linalg.eigvalsh(0.5 * (s + s.T))))


def detectable(a, c, tol: float = 1e-9) -> bool:
    """PBH test: ``rank [A - l I; C] = n`` for every eigenvalue with ``Re l >= 0``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    n = a.shape[0]
    for lam in np.linalg.eigvals(a):
        if lam.real >= -tol:
            pbh = np.vstack([a - lam * np.eye(n), c])
            if np.linalg.matrix_rank(pbh, tol=1e-8) < n:
                return False
    return True


def _pole_set(poles, n: int) -> np.ndarray:
    poles = list(poles) if poles is not None else []
    j = 1
    while len(poles) < n:
        cand = -float(j)
        if cand not in poles:
            poles.append(cand)
        j += 1
    return np.asarray(poles[:n], dtype=float)


def build_gains(system: Union[SystemMap, AsymptoticPair], poles=(-1.0, -2.0), margin: float = 0.0,
                horizon: float = 10.0, n_grid: int = 10_000) -> GainSchedule:
    """Constant ``K`` by pole placement and constant ``P`` from a Lyapunov equation.

    ``P`` solves ``P (A - K C) + (A - K C)^T P = -(2 + margin) I``. For
    time-invariant maps the sup-norms are exact; otherwise they are maximized
    over ``n_grid`` points of ``[0, horizon]`` and padded by 5%.
    """
    smap = system.sigma_inf if isinstance(system, AsymptoticPair) else system
    a0, c0 = smap.a(0.0), smap.c(0.0)
    n = a0.shape[0]
    if not detectable(a0, c0):
        raise UnstabilizablePair("(C, A) is not detectable")
    try:
        k = place_poles(a0.T, c0.T, _pole_set(poles, n)).gain_matrix.T
    except ValueError as exc:
        raise UnstabilizablePair(f"pole placement failed: {exc}") from exc
    closed = a0 - k @ c0
    if np.max(np.linalg.eigvals(closed).real) >= 0:
        raise UnstabilizablePair("A - K C is not Hurwitz")
    p = solve_continuous_lyapunov(closed.T, -(2.0 + margin) * np.eye(n))
    p = 0.5 * (p + p.T)
    eig = np.linalg.eigvalsh(p)

    def spectral(fn):
        if smap.time_invariant:
            return float(np.linalg.norm(fn(0.0), 2))
        grid = np.linspace(0.0, horizon, n_grid)
        return 1.05 * max(float(np.linalg.norm(fn(t), 2)) for t in grid)

    return GainSchedule(
        k=lambda t: k,
        p_mat=lambda t: p,
        p_lower=float(eig[0]),
        p_upper=float(eig[-1]),
        sup_k=float(np.linalg.norm(k, 2)),
        sup_b=spectral(smap.b),
        sup_d=spectral(smap.d),
        a=smap.a,
        c=smap.c,
    )


# -- tuning ----------------------------------------------------------------------------


@dataclass
class TuningRecord:
    epsilon: float
    n_bound: float
    omega: float
    p_star: float
    pi1_0: float
    pi2: Optional[Callable] = None
    pi3: Optional[Callable] = None
    predicate_log: dict = field(default_factory=dict)


def invert_increasing(fn: Callable[[float], float], value: float, hi: float = 1.0, iters: int = 200) -> float:
    """``s >= 0`` with ``fn(s) = value`` for increasing ``fn`` with ``fn(0) = 0``."""
    if value <= fn(0.0):
        return 0.0
    while fn(hi) < value:
        hi *= 2.0
        if hi > 1e300:
            raise TuningDiverged("inverse not found")
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) < value:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return hi


def tuning_predicates(cert: ContractionCertificate, gains: GainSchedule, smap: SystemMap, pi1, p: float,
                      epsilon: float, lam: Optional[Callable[[float, float], float]] = None) -> dict:
    """Values and bounds of the three tuning inequalities at parameter ``p``.

    ``phi(p) = (1 + sup|K|) xi((n + m) mu(p))``, with ``lam(r, p)`` in place
    of ``xi(r)`` for asymptotic symmetries.
    """
    n, m = smap.n, smap.m
    mu = float(cert.mu(p))
    r = (n + m) * mu
    growth = float(lam(r, p)) if lam is not None else float(smap.xi(r))
    phi = (1.0 + gains.sup_k) * growth
    pl, pu = gains.p_lower, gains.p_upper
    pi1_0 = float(pi1(0.0))
    bd = gains.sup_b + gains.sup_d
    a_val = 8.0 * pu * pu * phi / pl
    b_val = float(pi1(n * mu))
    c_val = (1.0 + gains.sup_k) * ((bd + phi) ** 2 - bd ** 2)
    c_bound = (4.0 * pu * math.sqrt(2.0 * pu / pl)) ** -2 * epsilon ** 2 / (4.0 * pi1_0 ** 2)
    log = {
        "phi": phi,
        "a": {"value": a_val, "bound": 1.0, "slack": 1.0 - a_val},
        "b": {"value": b_val, "bound": 2.0 * pi1_0, "slack": 2.0 * pi1_0 - b_val},
        "c": {"value": c_val, "bound": c_bound, "slack": c_bound - c_val},
    }
    log["passed"] = all(log[key]["slack"] >= 0 for key in "abc")
    return log


def tune_p(cert: ContractionCertificate, gains: GainSchedule, smap: SystemMap, pi1, pi2, epsilon: float,
           n_bound: float, p0: float = 0.0, cap: float = 1e6, lam=None, pi3=None,
           sigma_inv: Optional[Callable[[float], float]] = None) -> TuningRecord:
    """Smallest admissible ``omega`` (doubling, then 40 bisections) and ``p = sigma(omega)``."""
    if not (epsilon > 0 and n_bound > 0):
        raise InvalidBounds("epsilon and N must be positive")
    inv = sigma_inv or cert.sigma_inv or (lambda v: invert_increasing(cert.sigma, v))
    omega_min = max(inv(p0) if p0 > 0 else 0.0, n_bound)

    def check(omega):
        return tuning_predicates(cert, gains, smap, pi1, float(cert.sigma(omega)), epsilon, lam)

    hi = omega_min * (1.0 + 1e-9) + 1e-12
    log = check(hi)
    if log["passed"]:
        lo = None
    else:
        lo = hi
        while True:
            hi = 2.0 * hi
            if hi > cap:
                raise TuningDiverged(f"no omega below {cap} satisfies the tuning inequalities")
            log = check(hi)
            if log["passed"]:
                break
            lo = hi
    if lo is not None:
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            mid_log = check(mid)
            if mid_log["passed"]:
                hi, log = mid, mid_log
            else:
                lo = mid
    return TuningRecord(epsilon, n_bound, hi, float(cert.sigma(hi)), float(pi1(0.0)), pi2, pi3, log)


def error_bound(gains: GainSchedule, pi1_0: float, pi3, sup_d: float, epsilon: float) -> float:
    """Asymptotic error bound ``{eps + 8 pu sqrt(2 pu/pl) (1+K)(B+D) pi1(0)} pi3(sup|d|)``."""
    pu, pl = gains.p_upper, gains.p_lower
    gain = 8.0 * pu * math.sqrt(2.0 * pu / pl) * (1.0 + gains.sup_k) * (gains.sup_b + gains.sup_d) * pi1_0
    p3 = float(pi3(sup_d)) if callable(pi3) else float(pi3)
    return (epsilon + gain) * p3


# -- rig -------------------------------------------------------------------------------


@dataclass
class ObserverRig:
    variant: str
    smap: SystemMap
    gains: GainSchedule
    action: Optional[GroupAction] = None
    cert: Optional[ContractionCertificate] = None
    p: float = 0.0
    generator: Optional[Generator] = None
    schedule: Optional[PSchedule] = None
    sine: Optional[SineData] = None
    selection: Optional[LambdaSelection] = None
    asymptotic: Optional[AsymptoticPair] = None
    gamma: Optional[float] = None
    sat_level: Optional[float] = None
    partial: bool = False
    tuning: Optional[TuningRecord] = None
    chi: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown observer variant {self.variant!r}")
        if self.chi is None:
            self.chi = np.zeros(self.smap.n)
        self.chi = nm.vec(self.chi).copy()
        needs = {
            "semiglobal": ("action", "cert"),
            "partial": ("action", "cert"),
            "global": ("action", "cert", "generator", "schedule", "sine", "selection"),
            "finite_time": ("action",),
            "avs": ("action", "cert", "asymptotic"),
            "hgo": ("gamma", "sat_level"),
            "slo": ("gamma", "sat_level"),
        }[self.variant]
        missing = [name for name in needs if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.variant} observer needs {', '.join(missing)}")
        if self.p < 0 or not math.isfinite(self.p):
            raise ValueError("p must be finite and non-negative")
        if self.variant in ("hgo", "slo") and not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def n_out(self) -> int:
        return self.smap.p

    @property
    def is_partial(self) -> bool:
        return self.variant == "partial" or (self.variant == "global" and self.partial)


def _time_jacobian(action: GroupAction, p: float, t: float) -> float:
    jt = float(action.time_jacobian(p, t))
    if not math.isfinite(jt) or abs(jt) < TIME_JACOBIAN_TOL:
        raise SingularTimeJacobian(f"dPsi^t/dt = {jt} at p={p}, t={t}")
    return jt


def saturate_state(cert: ContractionCertificate, p: float, chi) -> np.ndarray:
    """``Gamma_{-p} sat_mu(p)(Gamma_p chi)`` on the certified indices, identity elsewhere."""
    chi = nm.vec(chi)
    out = chi.copy()
    idx = list(cert.group.index_x)
    if idx:
        scaled = cert.group.scale_x(p, chi[idx])
        out[idx] = cert.group.scale_x(-p, saturate(float(cert.mu(p)), scaled))
    return out


def _partial_point(rig: ObserverRig, p: float, yp: np.ndarray, chi: np.ndarray) -> np.ndarray:
    """``(Psi^y_p(y), chi_2)`` with the certified components of ``chi_2`` saturated."""
    return saturate_state(rig.cert, p, np.concatenate([yp, chi[rig.n_out:]]))


def _f1(rig: ObserverRig, tp: float, yp: np.ndarray) -> np.ndarray:
    if rig.smap.f1 is None:
        return np.zeros(rig.smap.n)
    return nm.vec(rig.smap.f1(tp, yp))


def _transformed(rig: ObserverRig, p: float, t: float, y):
    tp = float(rig.action.psi_t(p, t))
    jt = _time_jacobian(rig.action, p, t)
    yp = nm.vec(rig.action.psi_y(p, t, nm.vec(y)))
    return tp, jt, yp


def semiglobal_rhs(rig: ObserverRig, t: float, y, chi=None, p: Optional[float] = None):
    """``(dchi, zeta)`` of the constant-parameter filter."""
    chi = rig.chi if chi is None else nm.vec(chi)
    p = rig.p if p is None else p
    smap, n = rig.smap, rig.smap.n
    tp, jt, yp = _transformed(rig, p, t, y)
    sat = saturate_state(rig.cert, p, chi)
    dl = smap.delta_l(tp, sat, np.zeros(smap.m))
    zeta = smap.c(tp) @ chi + dl[n:]
    dchi = jt * (smap.a(tp) @ chi + dl[:n] + rig.gains.k(tp) @ (yp - zeta))
    return dchi, zeta


def partial_rhs(rig: ObserverRig, t: float, y, chi=None, p: Optional[float] = None) -> np.ndarray:
    """Filter with the measured block replaced by the transformed output."""
    chi = rig.chi if chi is None else nm.vec(chi)
    p = rig.p if p is None else p
    smap, n, q = rig.smap, rig.smap.n, rig.n_out
    tp, jt, yp = _transformed(rig, p, t, y)
    point = _partial_point(rig, p, yp, chi)
    dl = smap.delta_l(tp, point, np.zeros(smap.m))
    return jt * (smap.a(tp) @ chi + _f1(rig, tp, yp) + dl[:n] + rig.gains.k(tp) @ (yp - chi[:q]))


def global_rhs(rig: ObserverRig, t: float, y, vhat: Optional[float] = None, dvhat: Optional[float] = None,
               chi=None, p: Optional[float] = None, dp: Optional[float] = None):
    """``(dchi, zeta, dp)`` of the filter driven by a time-varying parameter.

    ``p`` and its derivative come from the schedule and the norm-estimator
    state unless given explicitly.
    """
    chi = rig.chi if chi is None else nm.vec(chi)
    if p is None:
        p = p_of_t(rig.schedule, vhat)
    if dp is None:
        dp = dp_dvhat(rig.schedule, vhat) * dvhat
    smap, n, q = rig.smap, rig.smap.n, rig.n_out
    tp, jt, yp = _transformed(rig, p, t, y)
    g0 = rig.generator.gx_linear_part(tp, n)
    if rig.is_partial:
        point = _partial_point(rig, p, yp, chi)
        innovation = yp - chi[:q]
        zeta = chi[:q]
        extra = _f1(rig, tp, yp)
    else:
        point = saturate_state(rig.cert, p, chi)
        extra = np.zeros(n)
        zeta = None
    dl = smap.delta_l(tp, point, np.zeros(smap.m))
    if zeta is None:
        zeta = smap.c(tp) @ chi + dl[n:]
        innovation = yp - zeta
    correction = (nm.vec(rig.generator.g_x(tp, point)) - g0 @ point) * (dp / jt)
    dchi = jt * (smap.a(tp) @ chi + (g0 @ chi) * (dp / jt) + extra + dl[:n] + correction
                 + rig.gains.k(tp) @ innovation)
    return dchi, zeta, dp


def dom_plus(rig: ObserverRig, p: Optional[float] = None) -> float:
    return float(rig.action.dom_plus_t(rig.p if p is None else p))


def finite_time_rhs(rig: ObserverRig, t: float, y, chi=None, p: Optional[float] = None) -> np.ndarray:
    """Linear filter ``J [(A - K C) chi + K Psi^y_p(y)]`` valid until ``Dom+ - guard``."""
    chi = rig.chi if chi is None else nm.vec(chi)
    p = rig.p if p is None else p
    if t > dom_plus(rig, p) - BLOWUP_GUARD + 1e-12:
        raise PastBlowup(f"t={t} is past Dom+ - {BLOWUP_GUARD}")
    tp, jt, yp = _transformed(rig, p, t, y)
    return jt * theta_rhs(rig, tp, chi, yp)


def theta_rhs(rig: ObserverRig, tp: float, chi, yp) -> np.ndarray:
    """The finite-time filter written in transformed time ``theta = Psi^t_p(t)``."""
    k = rig.gains.k(tp)
    return (rig.smap.a(tp) - k @ rig.smap.c(tp)) @ nm.vec(chi) + k @ nm.vec(yp)


def avs_rhs(rig: ObserverRig, t: float, y, chi=None, p: Optional[float] = None):
    """``(dchi, zeta)`` of the filter designed on the limit system."""
    chi = rig.chi if chi is None else nm.vec(chi)
    p = rig.p if p is None else p
    inf = rig.asymptotic.sigma_inf
    n = inf.n
    tp, jt, yp = _transformed(rig, p, t, y)
    sat = saturate_state(rig.cert, p, chi)
    zero = np.zeros(inf.m)
    residual = delta_sigma_inf(rig.smap, inf, rig.action, p, tp, sat, zero) + inf.delta_l(tp, sat, zero)
    zeta = inf.c(tp) @ chi + residual[n:]
    dchi = jt * (inf.a(tp) @ chi + residual[:n] + rig.gains.k(tp) @ (yp - zeta))
    return dchi, zeta


def _gain_powers(gamma: float, n: int) -> np.ndarray:
    return gamma ** np.arange(1, n + 1, dtype=float)


def _baseline_terms(rig: ObserverRig, t: float, y, xhat):
    smap, n = rig.smap, rig.smap.n
    sat = saturate(rig.sat_level, xhat)
    dl = smap.delta_l(t, sat, np.zeros(smap.m))
    innovation = nm.vec(y) - (smap.c(t) @ xhat + dl[n:])
    return smap.a(t) @ xhat + dl[:n], innovation


def baseline_hgo_rhs(rig: ObserverRig, t: float, y, xhat=None) -> np.ndarray:
    """High-gain observer with gains ``gamma^i k_i`` and a saturated nonlinearity."""
    xhat = rig.chi if xhat is None else nm.vec(xhat)
    drift, innovation = _baseline_terms(rig, t, y, xhat)
    return drift + _gain_powers(rig.gamma, rig.smap.n) * (rig.gains.k(t) @ innovation)


DEADZONE = 1e-9


def baseline_slo_rhs(rig: ObserverRig, t: float, y, xhat=None) -> np.ndarray:
    """Sliding-mode observer: injections ``gamma^i k_i sgn(Y)|Y|^((n-i)/n)``.

    Innovations below ``DEADZONE`` in magnitude inject nothing; this removes
    the chattering of the sign term at the fixed integration step.
    """
    xhat = rig.chi if xhat is None else nm.vec(xhat)
    drift, innovation = _baseline_terms(rig, t, y, xhat)
    n = rig.smap.n
    y_err = float(innovation[0])
    if abs(y_err) < DEADZONE:
        return drift
    powers = (n - np.arange(1, n + 1, dtype=float)) / n
    inj = np.sign(y_err) * np.abs(y_err) ** powers
    k = rig.gains.k(t)[:, 0]
    return drift + _gain_powers(rig.gamma, n) * k * inj


def output_map(rig: ObserverRig, t: float, y=None, chi=None, p: Optional[float] = None,
               vhat: Optional[float] = None) -> np.ndarray:
    """State estimate ``Psi^x_{-p}(Psi^t_p(t), chi_sat)``.

    The partial structure needs the current output ``y``. The global variant
    reads ``p`` from the schedule when ``vhat`` is given.
    """
    chi = rig.chi if chi is None else nm.vec(chi)
    if rig.variant in ("hgo", "slo"):
        return chi.copy()
    if p is None:
        p = p_of_t(rig.schedule, vhat) if (rig.variant == "global" and vhat is not None) else rig.p
    action = rig.action
    tp = float(action.psi_t(p, t))
    if rig.variant == "finite_time":
        return nm.vec(action.psi_x(-p, tp, chi))
    if rig.is_partial:
        if y is None:
            raise ValueError("the partial observer needs the current output")
        y = nm.vec(y)
        yp = nm.vec(action.psi_y(p, t, y))
        point = _partial_point(rig, p, yp, chi)
        return np.concatenate([y, nm.vec(action.psi_x(-p, tp, point))[rig.n_out:]])
    return nm.vec(action.psi_x(-p, tp, saturate_state(rig.cert, p, chi)))


def rig_rhs(rig: ObserverRig, t: float, y, chi, p: Optional[float] = None,
            vhat: Optional[float] = None, dvhat: Optional[float] = None) -> np.ndarray:
    """Filter derivative for any variant (the ``zeta`` outputs are dropped)."""
    v = rig.variant
    if v == "semiglobal":
        return semiglobal_rhs(rig, t, y, chi, p)[0]
    if v == "partial":
        return partial_rhs(rig, t, y, chi, p)
    if v == "global":
        return global_rhs(rig, t, y, vhat, dvhat, chi, p)[0]
    if v == "finite_time":
        return finite_time_rhs(rig, t, y, chi, p)
    if v == "avs":
        return avs_rhs(rig, t, y, chi, p)[0]
    if v == "hgo":
        return baseline_hgo_rhs(rig, t, y, chi)
    return baseline_slo_rhs(rig, t, y, chi)


def linear_block(rig: ObserverRig, t: float, p: Optional[float] = None) -> Optional[np.ndarray]:
    """Stiff linear part of the filter, ``J (A - K C)``, for exponential integrators.

    ``None`` for the baselines, whose gains are moderate.
    """
    p = rig.p if p is None else p
    if rig.variant in ("hgo", "slo", "finite_time"):
        return None
    smap = rig.asymptotic.sigma_inf if rig.variant == "avs" else rig.smap
    tp = float(rig.action.psi_t(p, t))
    jt = _time_jacobian(rig.action, p, t)
    a, c, k = smap.a(tp), smap.c(tp), rig.gains.k(tp)
    # For the global variant the generator term depends on dp/dt and is
    # left in the explicit part.
    return jt * (a - k @ c)


def vhat_rhs(rig: ObserverRig, vhat: float, y) -> float:
    return sine_filter_rhs(rig.selection, rig.sine, vhat, float(np.linalg.norm(nm.vec(y))), rig.schedule.n_bound)


def with_p(rig: ObserverRig, p: float) -> ObserverRig:
    """Copy of ``rig`` with a different constant parameter."""
    return replace(rig, p=float(p), chi=rig.chi.copy())
