"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

The lines are collected by ``conftest.py`` and printed in a dedicated
section of the terminal summary. Every criterion also enforces its runtime
budget.
"""

import math
import time

import numpy as np
import pytest

from symobs.benchmarks import (
    BENCHMARK_NAMES,
    bench_e8,
    bench_ex1,
    bench_ex2,
    bench_ex3,
    bench_ex5,
    get_benchmark,
    suite_prolongation,
    suite_symmetry,
)
from symobs.cli import main as cli_main
from symobs.contraction import ContractionCertificate, verify_certificate
from symobs.norm_estimation import settle_time
from symobs.simulation import Scenario, build_rig, check_sine_envelope, integrate, within_bound
from symobs.system_maps import lie_symmetry_residual
from symobs.transform_groups import GroupAction, Generator, check_group_axioms, in_domain

SUITE_BENCHES = [
    ("ex1", bench_ex1),
    ("ex2", bench_ex2),
    ("ex3 k=2", lambda: bench_ex3(2)),
    ("ex3 k=3", lambda: bench_ex3(3)),
    ("ex5 r1=1 gamma=0", lambda: bench_ex5(1.0, 0.0)),
    ("ex5 r1=1 gamma=1", lambda: bench_ex5(1.0, 1.0)),
    ("e8", bench_e8),
]


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def verdict(log, number, title, ok, detail, elapsed, budget):
    in_time = elapsed < budget
    passed = bool(ok) and in_time
    line = (f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  "
            f"[{elapsed:.1f} s, budget {budget:g} s{'' if in_time else ', OVER BUDGET'}]  {detail}")
    print(line)
    log(line)
    assert passed, line


def sample_points(entry, smap, rng, count):
    ts, xs, ds = entry.box.sample(rng, count)
    return [(float(t), x, d, np.asarray(smap.h(t, x, d), dtype=float)) for t, x, d in zip(ts, xs, ds)]


def mutated(gen):
    def g_x(t, x):
        out = np.array(gen.g_x(t, x), dtype=float)
        out[-1] *= 1.1
        return out

    return Generator(gen.g_t, g_x, gen.g_d, gen.g_y)


# 1 ------------------------------------------------------------------------------------


def test_criterion_1_group_and_symmetry_suite(acceptance_log):
    worst_axiom = worst_lie = worst_push = 0.0
    weakest_mutation = math.inf
    failures = []
    with Timer() as clock:
        for label, make in SUITE_BENCHES:
            bench = make()
            for i, entry in enumerate(bench.symmetries):
                rng = np.random.default_rng(100 + i)
                pts = sample_points(entry, bench.smap, rng, 100)
                rep = check_group_axioms(entry.action, pts, entry.p_pairs)
                axiom = max(rep.identity, rep.inversion, rep.composition)
                worst_axiom = max(worst_axiom, axiom)
                if axiom >= 1e-8 or rep.checked == 0:
                    failures.append(f"{label}/{entry.name} axioms {axiom:.1e}")
                if not entry.exact:
                    continue
                sym = suite_symmetry(entry, bench.smap, 100, rng)
                worst_lie = max(worst_lie, sym["lie"])
                worst_push = max(worst_push, sym["pushforward"])
                if not (sym["lie"] < 1e-6 and sym["pushforward"] < 1e-6 and sym["pushforward_points"] >= 100):
                    failures.append(f"{label}/{entry.name} symmetry {sym}")
                bad = mutated(entry.generator)
                flag = max(lie_symmetry_residual(bench.smap, bad, t, x, d) for t, x, d, _ in pts[:20])
                weakest_mutation = min(weakest_mutation, flag)
                if flag <= 1e-6:
                    failures.append(f"{label}/{entry.name} mutation not flagged ({flag:.1e})")
    detail = (f"axioms<= {worst_axiom:.1e}, Lie<= {worst_lie:.1e}, pushforward<= {worst_push:.1e}, "
              f"weakest mutation {weakest_mutation:.1e}" + (f"; {failures}" if failures else ""))
    verdict(acceptance_log, 1, "group/symmetry suite", not failures, detail, clock.elapsed, 10)


# 2 ------------------------------------------------------------------------------------


def test_criterion_2_prolongation_cross_check(acceptance_log):
    worst, checked, failures = 0.0, 0, []
    with Timer() as clock:
        for name in BENCHMARK_NAMES:
            bench = get_benchmark(name)
            for i, entry in enumerate(bench.symmetries):
                rep = suite_prolongation(entry, bench.smap, 20, np.random.default_rng(200 + i))
                worst = max(worst, rep["max_residual"])
                checked += rep["checked"]
                if not rep["passed"]:
                    failures.append(f"{name}/{entry.name}")
    detail = f"max transport residual {worst:.1e} over {checked} points" + (f"; {failures}" if failures else "")
    verdict(acceptance_log, 2, "prolongation cross-check", not failures and worst < 1e-5, detail, clock.elapsed, 5)


# 3 ------------------------------------------------------------------------------------


def shipped_certificates():
    for label, make in SUITE_BENCHES:
        bench = make()
        for entry in bench.symmetries:
            if entry.certify is None:
                continue
            phis = [None] + ([bench.gs6_phi] if bench.gs6_phi is not None else [])
            for delta in (0.2, 0.5, 0.9):
                for phi in phis:
                    yield f"{label}/{entry.name}/delta={delta}", entry, entry.certificate(delta, phi)


def test_criterion_3_contraction_suite(acceptance_log):
    failures, total, certs, witnessed = [], 0, 0, 0
    with Timer() as clock:
        for label, entry, cert in shipped_certificates():
            certs += 1
            rep = verify_certificate(cert, entry.action, entry.box, entry.p_grid, 100, seed=3)
            total += rep.applicable
            if not rep.passed:
                failures.append(f"{label} {rep.satisfied}/{rep.applicable}")
            shrunk = ContractionCertificate(cert.sigma, lambda s, mu=cert.mu: mu(s) / 10.0, cert.group, cert.kind)
            bad = verify_certificate(shrunk, entry.action, entry.box, entry.p_grid, 100, seed=3)
            if not bad.witnesses:
                # The certificate built on the steep global comparison function
                # is about 8.7 times slack at its tightest point, so mu / 10
                # fails only on a thin set that needs a denser sweep.
                bad = verify_certificate(shrunk, entry.action, entry.box, entry.p_grid, 1000, seed=3)
            if bad.witnesses and not bad.passed:
                witnessed += 1
            else:
                failures.append(f"{label} shrunk mu not witnessed")
    detail = f"{certs} certificates, {total} applicable samples all satisfied, {witnessed} mutations witnessed"
    if failures:
        detail += f"; {failures}"
    verdict(acceptance_log, 3, "contraction suite", not failures, detail, clock.elapsed, 5)


# 4 ------------------------------------------------------------------------------------


def test_criterion_4_semiglobal_convergence(acceptance_log):
    # Off the x2 = 0 axis the plant escapes in finite time, so the random
    # initial conditions are equilibria (u, 0) with |u| <= N.
    rng = np.random.default_rng(4)
    tails, norms, p = [], [], None
    with Timer() as clock:
        for u in rng.uniform(-1.0, 1.0, 10):
            sc = Scenario(benchmark="ex3", observer="semiglobal", k=2, epsilon=0.1, n_bound=1.0,
                          disturbance="zero", x0=(float(u), 0.0), horizon=10.0, h0=0.01)
            traj = integrate(sc)
            p = traj.info["p"]
            tails.append(traj.info["limsup_error"] if not traj.diverged else math.inf)
            norms.append(traj.info["max_xd_norm"])
    ok = max(tails) < 1e-3 and max(norms) <= 1.0
    detail = f"tuned p={p:.3f}, worst tail error {max(tails):.2e} < 1e-3, max |(x,d)| {max(norms):.3f} <= N=1"
    verdict(acceptance_log, 4, "semiglobal convergence (ex3, d=0)", ok, detail, clock.elapsed, 30)


# 5 ------------------------------------------------------------------------------------


def test_criterion_5_semiglobal_bound(acceptance_log):
    tails, bound = [], None
    with Timer() as clock:
        for seed in range(10):
            rng = np.random.default_rng(seed)
            x0 = np.array([0.0, -0.3]) + rng.uniform(-0.01, 0.01, 2)
            chi0 = rng.uniform(-1e-3, 1e-3, 2)
            sc = Scenario(benchmark="ex3", observer="semiglobal", disturbance="sinusoid", amplitude=0.3,
                          x0=tuple(x0), chi0=tuple(chi0), horizon=20.0, h0=0.01, seed=seed)
            traj = integrate(sc)
            bound = traj.info["error_bound"]
            tails.append(math.inf if traj.diverged else traj.info["limsup_error"])
        sc = Scenario(benchmark="ex3-ii", observer="semiglobal", disturbance="sinusoid", amplitude=0.3,
                      x0=(0.2, -0.012), horizon=20.0, h0=0.01)
        insensitive = integrate(sc)
        entry = get_benchmark("ex3-ii").design("semiglobal")
        target = sc.epsilon * float(entry.pi3(0.3)) * 1.1
        tail_ii = math.inf if insensitive.diverged else insensitive.info["limsup_error"]
    ok = all(t <= bound for t in tails) and tail_ii <= target
    detail = (f"ex3: worst tail {max(tails):.2e} <= bound {bound:.4g} over 10 seeds; "
              f"input-insensitive: tail {tail_ii:.2e} <= {target:.4g}")
    verdict(acceptance_log, 5, "semiglobal error bound (d = 0.3 sin t)", ok, detail, clock.elapsed, 60)


# 6 ------------------------------------------------------------------------------------


def test_criterion_6_global_observer(acceptance_log):
    rows, failures = [], []
    with Timer() as clock:
        for name in ("ex6", "ex3"):
            bench = get_benchmark(name)
            for size in (1.0, 10.0, 50.0):
                if name == "ex3":
                    # (s, 0) is an equilibrium; every other state escapes.
                    x0, dist = (size, 0.0), dict(disturbance="zero")
                else:
                    x0 = (size / math.sqrt(2.0), -size / math.sqrt(2.0))
                    dist = dict(disturbance="constant", amplitude=-0.3)
                _, rig, info = build_rig(Scenario(benchmark=name, observer="global", x0=x0, **dist))
                t_settle = settle_time(bench.sine, rig.selection, bench.sine.v(0.0, np.array(x0)))
                # x2' = x2^2 gives a Jacobian of about 2|x0| at the start; the
                # step keeps explicit RK4 on the plant stable.
                sc = Scenario(benchmark=name, observer="global", x0=x0, horizon=1.25 * t_settle + 10.0,
                              h0=min(0.05, 1.0 / size), **dist)
                traj = integrate(sc)
                env = check_sine_envelope(traj, bench.sine, rig.selection, sc.omega1)
                tail = math.inf if traj.diverged else traj.info["limsup_error"]
                inside = within_bound(tail, info["error_bound"])
                rows.append(f"{name}|x0|={size:g}: settle {t_settle:.0f}s tail {tail:.1e}")
                if not (env["passed"] and env["checked"] > 0 and inside):
                    failures.append(f"{name} |x0|={size:g} envelope={env['passed']} tail={tail:.2e} "
                                    f"bound={info['error_bound']:.3g}")
    detail = "; ".join(rows) + (f"; FAILED {failures}" if failures else "")
    verdict(acceptance_log, 6, "global observer (ex6, ex3)", not failures, detail, clock.elapsed, 120)


# 7 ------------------------------------------------------------------------------------


def test_criterion_7_finite_time(acceptance_log):
    rng = np.random.default_rng(7)
    worst_clean, worst_ratio = 0.0, 0.0
    failures = []
    with Timer() as clock:
        for _ in range(10):
            direction = rng.normal(size=2)
            x0 = tuple(rng.uniform(0.0, 100.0) * direction / np.linalg.norm(direction))
            sc = Scenario(benchmark="ex2", observer="finite-time", poles=(-1.0, -2.0), horizon=1.0, x0=x0)
            traj = integrate(sc)
            assert traj.info["p"] == 1.0 / sc.horizon
            err = float(np.interp(1.0 - 1e-3, traj.t, traj.err))
            worst_clean = max(worst_clean, err)
            noisy = integrate(Scenario(benchmark="ex2", observer="finite-time", poles=(-1.0, -2.0), horizon=1.0,
                                       x0=x0, disturbance="sinusoid", amplitude=0.2, frequency=3.0))
            bound = noisy.info["error_bound"]
            worst_ratio = max(worst_ratio, noisy.err[-1] / bound)
            if traj.diverged or noisy.diverged or err >= 1e-4 or noisy.err[-1] > bound:
                failures.append(x0)
    detail = (f"d=0: worst error at t=1-1e-3 {worst_clean:.2e} < 1e-4; |d|=0.2: worst terminal error "
              f"{worst_ratio:.2e} of the bound {bound:.4g}")
    verdict(acceptance_log, 7, "finite-time observer (ex2)", not failures, detail, clock.elapsed, 10)


# 8 ------------------------------------------------------------------------------------


def test_criterion_8_asymptotic_symmetry(acceptance_log):
    with Timer() as clock:
        common = dict(benchmark="e8", k=2, g_t=6.0, disturbance="sinusoid", amplitude=0.3)
        sc = Scenario(observer="avs", x0=(0.0, -0.3), horizon=20.0, h0=0.01, **common)
        traj = integrate(sc)
        tail = math.inf if traj.diverged else traj.info["limsup_error"]
        target = sc.epsilon * float(get_benchmark("e8").design("avs").pi3(0.3)) * 1.1
        _, _, semi = build_rig(Scenario(observer="semiglobal", **common))
        semi_bound = semi["error_bound"]
    ok = tail <= target and tail < semi_bound
    detail = f"AVS p={traj.info['p']:.3f}, tail {tail:.2e} <= {target:.4g} and < semiglobal bound {semi_bound:.4g}"
    verdict(acceptance_log, 8, "asymptotic-symmetry observer (e8)", ok, detail, clock.elapsed, 60)


# 9 ------------------------------------------------------------------------------------


def test_criterion_9_baselines(acceptance_log):
    with Timer() as clock:
        hgo = []
        for gamma in (5.0, 10.0, 20.0):
            traj = integrate(Scenario(benchmark="ex3", observer="hgo", gamma=gamma, x0=(0.5, 0.0),
                                      horizon=1.0, h0=1e-3))
            hgo.append(math.inf if traj.diverged else traj.info["limsup_error"])
        slo = integrate(Scenario(benchmark="ex3", observer="slo", gamma=1.0, x0=(0.5, 0.0), horizon=4.0, h0=5e-5))
        slo_tail = math.inf if slo.diverged else slo.info["limsup_error"]
        finite = bool(np.all(np.isfinite(np.hstack([slo.x, slo.xhat, slo.chi]))))
    ok = hgo[0] > hgo[1] > hgo[2] and slo_tail < 1e-4 and finite
    detail = (f"HGO tails {', '.join(f'{v:.2e}' for v in hgo)} for gamma 5, 10, 20; "
              f"SLO tail {slo_tail:.2e} < 1e-4")
    verdict(acceptance_log, 9, "baseline observers", ok, detail, clock.elapsed, 30)


# 10 -----------------------------------------------------------------------------------


def _rel(a, b):
    a, b = np.atleast_1d(np.asarray(a, dtype=float)), np.atleast_1d(np.asarray(b, dtype=float))
    scale = np.linalg.norm(a)
    return float(np.linalg.norm(a - b) / scale) if scale > 0 else float(np.linalg.norm(b))


def jacobian_errors():
    worst = 0.0
    for name in BENCHMARK_NAMES:
        bench = get_benchmark(name)
        rng = np.random.default_rng(10)
        for entry in bench.symmetries:
            act = entry.action
            fd = GroupAction(act.psi_t, act.psi_x, act.psi_d, act.psi_y)
            for t, x, d, y in sample_points(entry, bench.smap, rng, 20):
                for p in entry.p_grid[:5]:
                    if not in_domain(act, p, (t, x, d, y)):
                        continue
                    tp = float(act.psi_t(p, t))
                    xb = np.asarray(act.psi_x(p, t, x), dtype=float)
                    worst = max(
                        worst,
                        _rel(act.time_jacobian(p, t), fd.time_jacobian(p, t)),
                        _rel(act.x_time_derivative(p, t, x), fd.x_time_derivative(p, t, x)),
                        _rel(act.x_jacobian(p, t, x), fd.x_jacobian(p, t, x)),
                        _rel(act.x_inverse_jacobian(p, tp, xb), fd.x_inverse_jacobian(p, tp, xb)),
                    )
            gen = entry.generator
            if gen.dgx_dx0 is not None:
                for t in (0.0, 0.5, 2.0):
                    num = np.column_stack([(np.asarray(gen.g_x(t, e * 1e-6)) - np.asarray(gen.g_x(t, -e * 1e-6))) / 2e-6
                                           for e in np.eye(bench.smap.n)])
                    worst = max(worst, _rel(gen.dgx_dx0(t), num))
    return worst


def halving_ratio(**kw):
    finals = []
    for h in (0.01, 0.005, 0.0025):
        finals.append(integrate(Scenario(h0=h, integrator="rk4", **kw)).xhat[-1])
    return float(np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2]))


def test_criterion_10_numerical_hygiene(acceptance_log, tmp_path):
    with Timer() as clock:
        jac = jacobian_errors()
        ratios = [
            halving_ratio(benchmark="ex3", observer="hgo", gamma=5.0, x0=(0.5, 0.0), chi0=(0.0, 0.0), horizon=1.0),
            halving_ratio(benchmark="ex3", observer="semiglobal", p=1.0, delta=0.5, x0=(0.3, 0.0),
                          chi0=(0.1, 0.0), horizon=1.0),
        ]
        args = ["run", "--benchmark", "ex3", "--observer", "hgo", "--d", "noise", "--amp", "0.05", "--seed", "3",
                "--T", "1", "--x0", "0.2,0"]
        codes = [cli_main(args + ["--out", str(tmp_path / run)]) for run in ("a", "b")]
        same = (tmp_path / "a" / "ex3_hgo.csv").read_bytes() == (tmp_path / "b" / "ex3_hgo.csv").read_bytes()
    ok = jac < 1e-6 and all(8.0 <= r <= 32.0 for r in ratios) and same and codes == [0, 0]
    detail = (f"analytic vs finite-difference Jacobians {jac:.1e} < 1e-6 relative; step-halving ratios "
              f"{', '.join(f'{r:.1f}' for r in ratios)} in [8, 32]; identical seeds byte-identical CSV: {same}")
    verdict(acceptance_log, 10, "numerical hygiene", ok, detail, clock.elapsed, 60)
