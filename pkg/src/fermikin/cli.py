"""Command-line entry point.

    fermikin simulate SCENARIO.json [SCENARIO.json ...] [--out DIR] [--jobs K]
    fermikin compare SCENARIO.json --variant NAME [--out DIR]
    fermikin check TRAJECTORY.csv SCENARIO.json [--out FILE]

Exit status: 0 when every checked invariant holds, 2 on an invariant
failure, 1 on a configuration or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from fermikin.comparisons import VARIANTS, run_comparison
from fermikin.diagnostics import build_report
from fermikin.errors import ConfigurationError, FermikinError
from fermikin.integrators import Trajectory
from fermikin.scenario import Scenario, load_scenario, simulate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2

DIAG_COLUMNS = ("lambda_min", "lambda_max", "trace", "offdiag_norm")


def csv_header(n: int) -> list:
    return ["t"] + [f"f_{k}" for k in range(1, n + 1)] + list(DIAG_COLUMNS)


def _fmt(x) -> str:
    # repr of a Python float is the shortest string that round-trips
    return repr(float(x))


def write_trajectory_csv(traj: Trajectory, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(csv_header(traj.n))
    f = traj.occupations
    d = traj.diagnostics
    for k, t in enumerate(traj.times):
        w.writerow([_fmt(t)] + [_fmt(x) for x in f[k]] + [_fmt(d[c][k]) for c in DIAG_COLUMNS])


def read_trajectory_csv(path, n: int) -> Trajectory:
    """Rebuild a trajectory of diagonal states plus the recorded diagnostics."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigurationError(f"cannot read trajectory: {exc}") from None
    if not rows:
        raise ConfigurationError(f"{path}: empty file")
    expected = csv_header(n)
    if rows[0] != expected:
        raise ConfigurationError(f"{path}: header {rows[0]} does not match {expected}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(expected):
        raise ConfigurationError(f"{path}: expected rows of {len(expected)} values")
    f = data[:, 1:n + 1]
    states = np.zeros((data.shape[0], n, n), dtype=np.complex128)
    idx = np.arange(n)
    states[:, idx, idx] = f
    diags = {c: data[:, n + 1 + j] for j, c in enumerate(DIAG_COLUMNS)}
    try:
        return Trajectory(data[:, 0], states, diags)
    except FermikinError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def _dump(doc, fh):
    json.dump(doc, fh, sort_keys=True, indent=2, allow_nan=False)
    fh.write("\n")


def _atomic_write(path, writer):
    """Write through a temporary file in the same directory; nothing is left behind on error."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _remove(*paths):
    for p in paths:
        if os.path.exists(p):
            os.remove(p)


def _report_doc(sc: Scenario, result) -> dict:
    if result.report is not None:
        doc = result.report.as_dict()
    else:
        doc = {
            "tolerances": dict(sc.tolerances),
            "summary": {"passed": False, "first_violation_time": result.failure_time,
                        "failures": []},
            "records": [],
        }
    if result.failure:
        doc["summary"]["failures"].append(result.failure)
        doc["summary"]["passed"] = False
    doc["metadata"] = sc.metadata()
    if result.picard is not None:
        doc["picard"] = result.picard
    return doc


def _error(msg):
    print(f"error: {msg}", file=sys.stderr)


def simulate_file(path, out_dir, isolate=False) -> int:
    try:
        sc = load_scenario(path)
    except ConfigurationError as exc:
        _error(f"{path}: {exc}")
        return EXIT_CONFIG
    dest = os.path.join(out_dir, sc.name) if isolate else out_dir
    os.makedirs(dest, exist_ok=True)
    csv_path = os.path.join(dest, sc.output["csv"])
    report_path = os.path.join(dest, sc.output["report"])
    try:
        result = simulate(sc)
        doc = _report_doc(sc, result)
        passed = doc["summary"]["passed"]
        if passed:
            _atomic_write(csv_path, lambda fh: write_trajectory_csv(result.trajectory, fh))
        else:
            _remove(csv_path)
        _atomic_write(report_path, lambda fh: _dump(doc, fh))
    except ConfigurationError as exc:
        _remove(csv_path, report_path)
        _error(f"{path}: {exc}")
        return EXIT_CONFIG
    except BaseException:
        _remove(csv_path, report_path)
        raise
    if passed:
        print(f"{sc.name}: ok ({len(result.trajectory)} samples) -> {csv_path}")
        return EXIT_OK
    t = doc["summary"].get("first_violation_time")
    print(f"{sc.name}: invariant failure at t={t!r} -> {report_path}")
    return EXIT_INVARIANT


def _simulate_job(args):
    return simulate_file(*args)


def _combine(codes) -> int:
    if EXIT_CONFIG in codes:
        return EXIT_CONFIG
    return EXIT_INVARIANT if EXIT_INVARIANT in codes else EXIT_OK


def cmd_simulate(args) -> int:
    paths = args.scenario
    isolate = len(paths) > 1
    os.makedirs(args.out, exist_ok=True)
    jobs = [(p, args.out, isolate) for p in paths]
    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_simulate_job, jobs))
    else:
        codes = [_simulate_job(j) for j in jobs]
    return _combine(codes)


def cmd_compare(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        doc = run_comparison(sc, args.variant)
    except ConfigurationError as exc:
        _error(f"{args.scenario}: {exc}")
        return EXIT_CONFIG
    except FermikinError as exc:
        _error(f"{args.scenario}: {type(exc).__name__}: {exc}")
        return EXIT_INVARIANT
    doc["metadata"] = sc.metadata()
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{sc.name}.compare.{args.variant}.json")
    _atomic_write(path, lambda fh: _dump(_finite(doc), fh))
    status = "passed" if doc["passed"] else "FAILED"
    print(f"{sc.name} [{args.variant}]: {status} -> {path}")
    return EXIT_OK if doc["passed"] else EXIT_INVARIANT


def _finite(x):
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def cmd_check(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        traj = read_trajectory_csv(args.trajectory, sc.n)
        report = build_report(traj, sc.tolerances, rates=sc.rates, model=sc.model,
                              coherence=False)
    except ConfigurationError as exc:
        _error(str(exc))
        return EXIT_CONFIG
    doc = report.as_dict()
    doc["metadata"] = sc.metadata()
    doc["metadata"]["trajectory"] = os.path.basename(args.trajectory)
    if args.out:
        _atomic_write(args.out, lambda fh: _dump(doc, fh))
    else:
        _dump(doc, sys.stdout)
    return EXIT_OK if report.passed else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fermikin",
        description="Fermionic master equations: simulate scenarios and certify invariants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate scenario files, write CSV and report")
    p.add_argument("scenario", nargs="+", help="scenario JSON file(s)")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--jobs", type=int, default=1,
                   help="run up to K scenario files in parallel, each in its own subdirectory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="limit or cross-method comparison")
    p.add_argument("scenario")
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", help="re-check invariants of a trajectory CSV")
    p.add_argument("trajectory")
    p.add_argument("scenario")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        _error("--jobs must be at least 1")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
