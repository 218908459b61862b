"""Command-line front end.

Four subcommands:

    symobs run     simulate one scenario, write the trajectory and a summary
    symobs verify  run the residual suites of a benchmark, print a JSON report
    symobs sweep   run a scenario over a grid of one parameter
    symobs list    show benchmarks, observers and disturbance profiles

Scenario files are plain text with one ``key = value`` pair per line, the
keys being :class:`~symobs.simulation.Scenario` field names. ``#`` starts a
comment, tuples are comma separated::

    benchmark = ex3
    observer = semiglobal
    x0 = 0.5, 0.0        # initial plant state
    horizon = 10

Command-line flags override values read from a file. Output goes to
``--out``, else ``$SYMOBS_OUT``, else the current directory.

Exit codes: 0 success, 1 divergence or a failed verification suite,
2 invalid input.

Trajectory CSV columns (format version 1):
``t, x1..xn, xhat1..xhatn, chi1..chin, p, vhat, err_norm``, every number
written with ``%.17g`` so that identical runs give identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .benchmarks import BENCHMARK_NAMES, DISTURBANCE_PROFILES, get_benchmark, validate
from .errors import DivergenceDetected, SymObsError
from .simulation import OBSERVER_NAMES, Scenario, integrate, within_bound

CSV_FORMAT_VERSION = 1
OUT_ENV = "SYMOBS_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# Sweep axis name -> Scenario field.
SWEEP_AXES = {"eps": "epsilon", "N": "n_bound", "amp": "amplitude", "gamma": "gamma"}

_TUPLE_FIELDS = {"x0", "chi0", "poles"}


class ConfigError(ValueError):
    pass


# -- scenario files -------------------------------------------------------------------


def _coerce(name: str, raw: str):
    fields = {f.name: f for f in dataclasses.fields(Scenario)}
    if name not in fields:
        raise ConfigError(f"unknown scenario key {name!r}")
    raw = raw.strip()
    if name in _TUPLE_FIELDS:
        if raw.lower() in ("", "none"):
            return None
        return tuple(float(v) for v in raw.split(","))
    default = fields[name].default
    if raw.lower() == "none":
        return None
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float) or default is None:
        return float(raw)
    return raw


def parse_scenario_text(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of Scenario keyword arguments."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return out


def load_scenario_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from None
    return parse_scenario_text(text)


# -- argument parsing -----------------------------------------------------------------


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario file with key = value lines")
    p.add_argument("--benchmark", choices=BENCHMARK_NAMES)
    p.add_argument("--observer", choices=sorted(OBSERVER_NAMES))
    p.add_argument("--eps", dest="epsilon", type=float)
    p.add_argument("--N", dest="n_bound", type=float)
    p.add_argument("--d", dest="disturbance", choices=DISTURBANCE_PROFILES)
    p.add_argument("--amp", dest="amplitude", type=float)
    p.add_argument("--freq", dest="frequency", type=float)
    p.add_argument("--T", "--horizon", dest="horizon", type=float)
    p.add_argument("--h0", type=float)
    p.add_argument("--x0", type=_floats)
    p.add_argument("--chi0", type=_floats)
    p.add_argument("--poles", type=_floats)
    p.add_argument("--delta", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--gt", dest="g_t", type=float)
    p.add_argument("--r1", type=float)
    p.add_argument("--weight-gamma", dest="weight_gamma", type=float)
    p.add_argument("--gamma", type=float, help="baseline gain")
    p.add_argument("--p", type=float, help="fixed group parameter, skipping tuning")
    p.add_argument("--p-max", dest="p_max", type=float)
    p.add_argument("--tail", dest="tail_fraction", type=float)
    p.add_argument("--integrator", choices=("etd", "rk4"))
    p.add_argument("--seed", type=int)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--name", help="file stem for the outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symobs", description="Symmetry-based observers for nonlinear systems.")
    parser.add_argument("--version", action="version", version=f"symobs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    _add_scenario_flags(run)
    _add_output_flags(run)

    ver = sub.add_parser("verify", help="run the residual suites of a benchmark")
    ver.add_argument("--benchmark", choices=BENCHMARK_NAMES, required=True)
    ver.add_argument("--k", type=int, default=2)
    ver.add_argument("--gt", dest="g_t", type=float, default=6.0)
    ver.add_argument("--r1", type=float, default=1.0)
    ver.add_argument("--weight-gamma", dest="weight_gamma", type=float, default=1.0)
    ver.add_argument("--samples", type=int, default=100)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--out", help="also write the report to this directory")

    sw = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    _add_scenario_flags(sw)
    _add_output_flags(sw)
    sw.add_argument("--axis", choices=sorted(SWEEP_AXES), required=True)
    sw.add_argument("--values", type=_floats, required=True)
    sw.add_argument("--workers", type=int, default=1)

    sub.add_parser("list", help="show benchmarks, observers and disturbances")
    return parser


def scenario_from_args(args: argparse.Namespace) -> Scenario:
    kwargs = load_scenario_file(args.config) if getattr(args, "config", None) else {}
    names = {f.name for f in dataclasses.fields(Scenario)}
    for key, value in vars(args).items():
        if key in names and value is not None:
            kwargs[key] = value
    try:
        return Scenario(**kwargs)
    except (TypeError, ValueError, SymObsError) as exc:
        raise ConfigError(str(exc)) from None


def output_dir(arg: Optional[str]) -> Path:
    path = Path(arg or os.environ.get(OUT_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


# -- serialization ----------------------------------------------------------------------


def _fmt(v) -> str:
    return "%.17g" % float(v)


def trajectory_csv(traj) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(traj.columns())
    for row in traj.rows():
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def summary_record(sc: Scenario, traj) -> dict:
    info = traj.info
    bound = info.get("error_bound")
    limsup = info.get("limsup_error")
    within = None if limsup is None else within_bound(limsup, bound)
    return {
        "benchmark": sc.benchmark,
        "observer": sc.observer,
        "p": float(traj.p[-1]) if sc.variant == "global" and len(traj) else info.get("p"),
        "error_bound": bound,
        "limsup_error": limsup,
        "within_bound": within,
        "diverged": bool(traj.diverged),
        "t_final": float(traj.t[-1]) if len(traj) else None,
        "steps": info.get("steps"),
    }


def trajectory_json(sc: Scenario, traj) -> str:
    doc = {
        "metadata": {
            "tool": "symobs",
            "version": __version__,
            "format_version": CSV_FORMAT_VERSION,
            "config": sc.to_dict(),
            "constants": {k: v for k, v in traj.info.items() if k != "predicates"},
        },
        "summary": summary_record(sc, traj),
        "columns": traj.columns(),
        "rows": [[float(v) for v in row] for row in traj.rows()],
    }
    return json.dumps(_jsonable(doc), indent=1, sort_keys=False) + "\n"


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


# -- commands -------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    sc = scenario_from_args(args)
    out = output_dir(args.out)
    stem = args.name or f"{sc.benchmark}_{sc.variant}"
    traj = integrate(sc)
    summary = summary_record(sc, traj)
    if args.format == "csv":
        (out / f"{stem}.csv").write_text(trajectory_csv(traj))
        (out / f"{stem}.summary.json").write_text(_dump({"config": sc.to_dict(), "summary": summary}))
    else:
        (out / f"{stem}.json").write_text(trajectory_json(sc, traj))
    sys.stdout.write(_dump(summary))
    if traj.diverged:
        print(f"symobs: trajectory diverged at t={traj.t[-1]:.6g}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    bench = get_benchmark(args.benchmark, k=args.k, g_t=args.g_t, strict=False, r1=args.r1,
                          gamma=args.weight_gamma)
    report = validate(bench, n_samples=args.samples, seed=args.seed)
    text = _dump(report)
    if args.out:
        (output_dir(args.out) / f"verify_{bench.name}.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _sweep_point(task):
    index, value, field, base = task
    sc = dataclasses.replace(base, **{field: value})
    try:
        traj = integrate(sc)
    except DivergenceDetected:
        return {"index": index, "value": value, "diverged": True}
    row = summary_record(sc, traj)
    row.update(index=index, value=value)
    return row


SWEEP_COLUMNS = ("index", "value", "p", "error_bound", "limsup_error", "within_bound", "diverged")


def cmd_sweep(args: argparse.Namespace) -> int:
    if not args.values:
        raise ConfigError("empty sweep grid")
    if args.workers < 1:
        raise ConfigError("workers must be at least 1")
    base = scenario_from_args(args)
    field = SWEEP_AXES[args.axis]
    if args.axis == "gamma" and base.variant not in ("hgo", "slo"):
        raise ConfigError("the gamma axis applies to the hgo and slo baselines")
    out = output_dir(args.out)
    tasks = [(i, v, field, base) for i, v in enumerate(args.values)]
    if args.workers == 1:
        rows = [_sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    stem = args.name or f"sweep_{base.benchmark}_{base.variant}_{args.axis}"
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else (_fmt(row[c]) if isinstance(row[c], float) else row[c])
                             for c in SWEEP_COLUMNS])
        (out / f"{stem}.csv").write_text(buf.getvalue())
    else:
        doc = {"metadata": {"tool": "symobs", "version": __version__, "axis": args.axis,
                            "config": base.to_dict()}, "rows": rows}
        (out / f"{stem}.json").write_text(_dump(doc))
    sys.stdout.write(_dump(rows))
    return EXIT_FAIL if any(r.get("diverged") for r in rows) else EXIT_OK


def cmd_list(args: argparse.Namespace) -> int:
    print("benchmarks:  " + " ".join(BENCHMARK_NAMES))
    print("observers:   " + " ".join(sorted(OBSERVER_NAMES)))
    print("disturbance: " + " ".join(DISTURBANCE_PROFILES))
    print("sweep axes:  " + " ".join(sorted(SWEEP_AXES)))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep, "list": cmd_list}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"symobs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceDetected as exc:
        print(f"symobs: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (SymObsError, ValueError) as exc:
        print(f"symobs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
