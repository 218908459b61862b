"""Joint integration of plant, observer and norm estimator.

The coupled state is ``(x, chi)`` plus ``vhat`` for the global observer.
Symmetry-based filters are stiff: their linear part is multiplied by the
time Jacobian of the group, which is ``e^{k p}`` for a dilation. That part
is integrated exactly with :class:`~symobs.integrators.EtdRk4`, everything
else with the matching fourth-order stages. Baselines use classical RK4.

The finite-time filter is integrated in transformed time
``theta = Psi^t_p(t)``, in which it is time invariant, while the plant stays
in original time.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _numerics as nm
from .benchmarks import Benchmark, disturbance, get_benchmark
from .errors import DivergenceDetected, InvalidBounds, PastBlowup
from .integrators import EtdRk4, rk4_step
from .norm_estimation import PSchedule, SineData, dp_dvhat, p_of_t, select_lambda, settle_time
from .observers import (
    BLOWUP_GUARD,
    ObserverRig,
    build_gains,
    error_bound,
    linear_block,
    output_map,
    rig_rhs,
    theta_rhs,
    tune_p,
    vhat_rhs,
)

DIVERGENCE_LEVEL = 1e9
OBSERVER_NAMES = {
    "semiglobal": "semiglobal",
    "partial": "partial",
    "global": "global",
    "finite-time": "finite_time",
    "finite_time": "finite_time",
    "avs": "avs",
    "hgo": "hgo",
    "slo": "slo",
}

# The asymptotic bound is exactly zero without disturbance, while a finite
# tail max never is. Comparisons against the bound allow this much slack.
BOUND_FLOOR = 1e-3

# Default contraction rate per observer. A larger delta lowers the tuned
# parameter of the fixed-p designs, and with it the e^{k p} amplification of
# rounding errors in the filter; the scheduled designs are capped by p_max.
DEFAULT_DELTA = {"semiglobal": 0.9, "partial": 0.2, "global": 0.5, "avs": 0.5}


@dataclass
class Scenario:
    benchmark: str = "ex3"
    observer: str = "semiglobal"
    k: int = 2
    g_t: float = 6.0
    strict: bool = True
    r1: float = 1.0
    weight_gamma: float = 1.0
    epsilon: float = 0.1
    n_bound: float = 1.0
    delta: Optional[float] = None
    omega0: float = 1.0
    omega1: float = 1.0
    poles: tuple = (-1.0, -2.0)
    gamma: float = 5.0
    sat_level: Optional[float] = None
    p: Optional[float] = None
    p_max: float = 10.0
    x0: tuple = (0.5, 0.0)
    chi0: Optional[tuple] = None
    vhat0: float = 0.0
    disturbance: str = "zero"
    amplitude: float = 0.0
    frequency: float = 1.0
    horizon: float = 10.0
    h0: float = 1e-2
    h_min: float = 1e-12
    seed: int = 0
    tail_fraction: float = 0.2
    integrator: str = "etd"

    def __post_init__(self):
        if not self.h0 > 0:
            raise InvalidBounds("h0 must be positive")
        if not self.horizon > 0:
            raise InvalidBounds("horizon must be positive")
        if self.observer not in OBSERVER_NAMES:
            raise ValueError(f"unknown observer {self.observer!r}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise InvalidBounds("delta must lie in (0, 1)")
        if not 0 < self.tail_fraction <= 1:
            raise InvalidBounds("tail_fraction must lie in (0, 1]")
        self.x0 = tuple(float(v) for v in self.x0)
        self.poles = tuple(float(v) for v in self.poles)
        if self.chi0 is not None:
            self.chi0 = tuple(float(v) for v in self.chi0)

    @property
    def variant(self) -> str:
        return OBSERVER_NAMES[self.observer]

    @property
    def contraction_delta(self) -> float:
        """``delta`` or the per-observer default from :data:`DEFAULT_DELTA`."""
        return self.delta if self.delta is not None else DEFAULT_DELTA.get(self.variant, 0.5)

    @property
    def sup_d(self) -> float:
        return 0.0 if self.disturbance == "zero" else abs(self.amplitude)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    chi: np.ndarray
    p: np.ndarray
    vhat: np.ndarray
    err: np.ndarray
    d: np.ndarray
    diverged: bool = False
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.size

    def rows(self):
        for i in range(self.t.size):
            yield [self.t[i], *self.x[i], *self.xhat[i], *self.chi[i], self.p[i], self.vhat[i], self.err[i]]

    def columns(self) -> list:
        n = self.x.shape[1]
        return (["t"] + [f"x{i + 1}" for i in range(n)] + [f"xhat{i + 1}" for i in range(n)]
                + [f"chi{i + 1}" for i in range(n)] + ["p", "vhat", "err_norm"])


# -- assembly --------------------------------------------------------------------------


def scenario_benchmark(sc: Scenario) -> Benchmark:
    return get_benchmark(sc.benchmark, k=sc.k, g_t=sc.g_t, strict=sc.strict, r1=sc.r1, gamma=sc.weight_gamma)


def build_rig(sc: Scenario, bench: Optional[Benchmark] = None):
    """Observer rig for a scenario plus a summary of the design constants."""
    bench = bench or scenario_benchmark(sc)
    smap = bench.smap
    variant = sc.variant
    info: dict = {"benchmark": bench.name, "variant": variant}
    chi0 = np.zeros(smap.n) if sc.chi0 is None else np.asarray(sc.chi0, dtype=float)

    if variant in ("hgo", "slo"):
        gains = build_gains(smap, sc.poles)
        sat = sc.sat_level if sc.sat_level is not None else 2.0 * sc.n_bound
        rig = ObserverRig(variant, smap, gains, gamma=sc.gamma, sat_level=sat, chi=chi0)
        info.update(gamma=sc.gamma, sat_level=sat)
        return bench, rig, info

    try:
        entry = bench.design(variant)
    except KeyError:
        raise ValueError(f"benchmark {bench.name} has no {variant} observer") from None

    if variant == "finite_time":
        gains = build_gains(smap, sc.poles)
        p = sc.p if sc.p is not None else 1.0 / sc.horizon
        rig = ObserverRig(variant, smap, gains, action=entry.action, p=p, chi=chi0)
        pi3 = bench.lts["pi3"] if bench.lts else 1.0
        info.update(p=p, dom_plus=float(entry.action.dom_plus_t(p)),
                    error_bound=error_bound(gains, 1.0, lambda s: pi3 * s, sc.sup_d, sc.epsilon))
        return bench, rig, info

    if variant == "global":
        if bench.sine is None:
            raise ValueError(f"benchmark {bench.name} ships no norm estimator")
        cert = entry.certificate(sc.contraction_delta, bench.gs6_phi)
        gains = build_gains(smap, sc.poles)
        sine: SineData = bench.sine
        sel = select_lambda(sine.alpha, sc.omega1)
        sched = PSchedule(cert.sigma, sc.omega0, sc.n_bound, sine.beta1, sc.omega1, sel.lambda1,
                          sine.alpha, sine.phi, sc.vhat0, sc.p_max, sine.beta0)
        rig = ObserverRig(variant, smap, gains, action=entry.action, cert=cert, generator=entry.generator,
                          schedule=sched, sine=sine, selection=sel, partial="measured" in bench.params, chi=chi0)
        info.update(lambda1=sel.lambda1, lambda0=sel.lambda0, omega1=sc.omega1, p_max=sc.p_max,
                    error_bound=error_bound(gains, float(entry.pi1(0.0)), entry.pi3, sc.sup_d, sc.epsilon))
        return bench, rig, info

    cert = entry.certificate(sc.contraction_delta)
    system = bench.asymptotic if variant == "avs" else smap
    gains = build_gains(system, sc.poles)
    lam = bench.asymptotic.lam if variant == "avs" else None
    if sc.p is not None:
        p, tuning = float(sc.p), None
    else:
        tuning = tune_p(cert, gains, smap, entry.pi1, entry.pi2, sc.epsilon, sc.n_bound, entry.p0,
                        lam=lam, pi3=entry.pi3)
        p = tuning.p_star
    rig = ObserverRig(variant, smap, gains, action=entry.action, cert=cert, p=p, asymptotic=bench.asymptotic,
                      tuning=tuning, chi=chi0)
    info.update(p=p, error_bound=error_bound(gains, float(entry.pi1(0.0)), entry.pi3, sc.sup_d, sc.epsilon))
    if tuning is not None:
        info.update(omega=tuning.omega, predicates=tuning.predicate_log)
    return bench, rig, info


# -- integration -----------------------------------------------------------------------


class _Recorder:
    def __init__(self, n: int):
        self.n = n
        self.rows: list = []

    def add(self, t, x, xhat, chi, p, vhat, d):
        self.rows.append((t, x.copy(), xhat.copy(), chi.copy(), p, vhat, d.copy()))

    def finish(self, diverged: bool, info: dict) -> Trajectory:
        t = np.array([r[0] for r in self.rows])
        x = np.array([r[1] for r in self.rows]).reshape(len(self.rows), self.n)
        xhat = np.array([r[2] for r in self.rows]).reshape(len(self.rows), self.n)
        chi = np.array([r[3] for r in self.rows]).reshape(len(self.rows), self.n)
        p = np.array([r[4] for r in self.rows], dtype=float)
        vhat = np.array([r[5] for r in self.rows], dtype=float)
        d = np.array([r[6] for r in self.rows])
        err = np.linalg.norm(x - xhat, axis=1) if len(self.rows) else np.zeros(0)
        return Trajectory(t, x, xhat, chi, p, vhat, err, d, diverged, info)


def _too_large(*arrays) -> bool:
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.max(np.abs(a), initial=0.0) > DIVERGENCE_LEVEL:
            return True
    return False


def integrate(sc: Scenario, strict: bool = False, rig: Optional[ObserverRig] = None,
              bench: Optional[Benchmark] = None, info: Optional[dict] = None) -> Trajectory:
    """Simulate a scenario and return the recorded trajectory.

    With ``strict`` a divergence raises :class:`DivergenceDetected`;
    otherwise the trajectory ends at the last finite point and is flagged.
    """
    if rig is None:
        bench, rig, info = build_rig(sc, bench)
    info = dict(info or {})
    if rig.variant == "finite_time":
        traj = _integrate_finite_time(sc, rig, info)
    else:
        traj = _integrate_forward(sc, rig, info)
    if traj.diverged and strict:
        raise DivergenceDetected("state exceeded the divergence level", t=float(traj.t[-1]))
    traj.info["max_xd_norm"] = float(np.max(np.linalg.norm(np.hstack([traj.x, traj.d]), axis=1)))
    traj.info["limsup_error"] = limsup_error(traj, sc.tail_fraction)
    return traj


def _dist(sc: Scenario, m: int):
    return disturbance(sc.disturbance, sc.amplitude, sc.frequency, sc.seed, m, sc.horizon + 1.0)


def _integrate_forward(sc: Scenario, rig: ObserverRig, info: dict) -> Trajectory:
    smap = rig.smap
    n = smap.n
    dist = _dist(sc, smap.m)
    glob = rig.variant == "global"
    sched = rig.schedule

    def parameter(vhat):
        return p_of_t(sched, max(vhat, 0.0)) if glob else rig.p

    def rhs(t, u):
        x, chi = u[:n], u[n:2 * n]
        d = dist(t)
        y = nm.vec(smap.h(t, x, d))
        out = np.empty_like(u)
        out[:n] = nm.vec(smap.f(t, x, d))
        if glob:
            vhat = max(u[2 * n], 0.0)
            dv = vhat_rhs(rig, vhat, y)
            p = p_of_t(sched, vhat)
            out[n:2 * n] = rig_rhs(rig, t, y, chi, p=p, vhat=vhat, dvhat=dv)
            out[2 * n] = dv
        else:
            out[n:2 * n] = rig_rhs(rig, t, y, chi)
        return out

    u = np.concatenate([np.asarray(sc.x0, dtype=float), rig.chi, [sc.vhat0] if glob else []])
    if u[:n].size != n:
        raise ValueError(f"x0 must have {n} entries")
    use_etd = sc.integrator == "etd" and rig.variant not in ("hgo", "slo")
    stepper = EtdRk4(slice(n, 2 * n)) if use_etd else None
    rec = _Recorder(n)
    t = 0.0

    def record(t, u):
        x, chi = u[:n], u[n:2 * n]
        d = dist(t)
        y = nm.vec(smap.h(t, x, d))
        vhat = float(u[2 * n]) if glob else 0.0
        p = parameter(vhat)
        xhat = output_map(rig, t, y, chi, p=p)
        rec.add(t, x, xhat, chi, p, vhat, d)
        return xhat

    xhat = record(t, u)
    diverged = False
    steps = 0
    while t < sc.horizon - 1e-12:
        h = min(sc.h0, sc.horizon - t)
        if glob:
            h = min(h, _global_step(rig, t, u, n, sc))
        if use_etd:
            p = parameter(float(u[2 * n])) if glob else rig.p
            u_new = stepper.step(rhs, t, u, h, linear_block(rig, t, p))
        else:
            u_new = rk4_step(rhs, t, u, h)
        if glob:
            u_new[2 * n] = max(u_new[2 * n], 0.0)
        t += h
        steps += 1
        if _too_large(u_new[:2 * n]):
            diverged = True
            break
        u = u_new
        xhat = record(t, u)
        if _too_large(xhat):
            diverged = True
            break
    info["steps"] = steps
    return rec.finish(diverged, info)


def _global_step(rig: ObserverRig, t: float, u: np.ndarray, n: int, sc: Scenario) -> float:
    """Step limit while ``p`` moves: the time Jacobian changes by a bounded
    fraction per step and its frozen value stays a valid linear block."""
    sched = rig.schedule
    smap = rig.smap
    vhat = max(float(u[2 * n]), 0.0)
    d = np.zeros(smap.m)
    y = nm.vec(smap.h(t, u[:n], d))
    dp = dp_dvhat(sched, vhat) * vhat_rhs(rig, vhat, y)
    if dp == 0.0:
        return math.inf
    p = p_of_t(sched, vhat)
    hp = 1e-6 * max(1.0, abs(p))
    action = rig.action
    jt = float(action.time_jacobian(p, t))
    dlnj = (math.log(float(action.time_jacobian(p + hp, t))) - math.log(float(action.time_jacobian(p - hp, t)))) / (2 * hp)
    rate = abs(dlnj * dp)
    if rate == 0.0:
        return math.inf
    stiff = jt * float(np.linalg.norm(smap.a(0.0) - rig.gains.k(0.0) @ smap.c(0.0), 2))
    h = min(0.05 / rate, 0.5 / math.sqrt(rate * stiff))
    return max(h, sc.h_min)


def _integrate_finite_time(sc: Scenario, rig: ObserverRig, info: dict) -> Trajectory:
    """Filter advanced in ``theta = Psi^t_p(t)`` up to ``Dom+ - guard``.

    The plant is integrated in original time with RK4 and sampled at the
    instants matching the stages of each ``theta`` step; the filter then sees
    its forcing ``K Psi^y_p(y)`` exactly at those stages.
    """
    smap, action, p = rig.smap, rig.action, rig.p
    n = smap.n
    dom = float(action.dom_plus_t(p))
    t_end = min(sc.horizon, dom - BLOWUP_GUARD)
    if t_end <= 0:
        raise PastBlowup("the blow-up instant precedes the start of the run")
    dist = _dist(sc, smap.m)

    def plant(t, x):
        return nm.vec(smap.f(t, x, dist(t)))

    def y_p(t, x):
        return nm.vec(action.psi_y(p, t, nm.vec(smap.h(t, x, dist(t)))))

    stepper = EtdRk4(slice(0, n))
    x = np.asarray(sc.x0, dtype=float)
    chi = rig.chi.copy()
    rec = _Recorder(n)

    def record(t, x, chi):
        xhat = output_map(rig, t, chi=chi)
        rec.add(t, x, xhat, chi, p, 0.0, dist(t))
        return xhat

    t = 0.0
    record(t, x, chi)
    diverged = False
    steps = 0
    while t < t_end - 1e-15:
        h = min(sc.h0, 0.1 * (dom - t), t_end - t)
        t_next = t + h
        th0, th1 = float(action.psi_t(p, t)), float(action.psi_t(p, t_next))
        th_mid = 0.5 * (th0 + th1)
        t_mid = float(action.psi_t(-p, th_mid))
        x_mid = rk4_step(plant, t, x, t_mid - t)
        x_next = rk4_step(plant, t_mid, x_mid, t_next - t_mid)
        forcing = {th0: y_p(t, x), th_mid: y_p(t_mid, x_mid), th1: y_p(t_next, x_next)}

        def rhs(theta, c):
            return theta_rhs(rig, theta, c, forcing[theta])

        lin = smap.a(th0) - rig.gains.k(th0) @ smap.c(th0)
        chi_next = stepper.step(rhs, th0, chi, th1 - th0, lin)
        steps += 1
        if _too_large(x_next, chi_next):
            diverged = True
            break
        t, x, chi = t_next, x_next, chi_next
        if _too_large(record(t, x, chi)):
            diverged = True
            break
    info.update(steps=steps, t_end=t_end)
    return rec.finish(diverged, info)


# -- metrics ---------------------------------------------------------------------------


def within_bound(limsup: float, bound: Optional[float], floor: float = BOUND_FLOOR) -> Optional[bool]:
    """``limsup <= max(bound, floor)``; ``None`` when there is no bound."""
    if bound is None:
        return None
    return bool(math.isfinite(limsup) and limsup <= max(bound, floor))


def limsup_error(traj: Trajectory, tail_fraction: float = 0.2) -> float:
    """Largest error over the final ``tail_fraction`` of the time span."""
    if len(traj) == 0:
        return math.nan
    t0, t1 = traj.t[0], traj.t[-1]
    cut = t1 - tail_fraction * (t1 - t0)
    mask = traj.t >= cut - 1e-12 * max(1.0, abs(t1))
    return float(np.max(traj.err[mask]))


def check_sine_envelope(traj: Trajectory, sine: SineData, sel, omega1: float) -> dict:
    """``V(t, x(t)) <= vhat(t) + omega1`` from the settle time on.

    Violations before the settle time are counted but allowed.
    """
    v = np.array([sine.v(t, x) for t, x in zip(traj.t, traj.x)])
    gap = v - (traj.vhat + omega1)
    t_settle = settle_time(sine, sel, float(v[0]))
    after = traj.t >= t_settle
    bad_after = np.flatnonzero(after & (gap > 1e-9))
    first = None
    if bad_after.size:
        i = int(bad_after[0])
        first = {"t": float(traj.t[i]), "v": float(v[i]), "vhat": float(traj.vhat[i])}
    return {
        "settle_time": t_settle,
        "checked": int(np.count_nonzero(after)),
        "violations": int(bad_after.size),
        "pre_settle_violations": int(np.count_nonzero(~after & (gap > 1e-9))),
        "first_violation": first,
        "max_gap_after": float(np.max(gap[after])) if np.any(after) else None,
        "passed": bad_after.size == 0,
    }
