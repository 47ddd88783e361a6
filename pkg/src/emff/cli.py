"""Command-line entry point: ``emff run``, ``emff verify`` and ``emff plotdata``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .errors import EMFFError
from .scenario import BUNDLED, ScenarioError, bundled_path, load_scenario
from .sim import ConstraintReport, Simulation, TrajectoryLog, monitor
from .verify import SUITES, run_suite

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# errors that mean the input itself is unusable rather than the numerics failing
CONFIG_CODES = {"config_error", "unsafe_initial_state", "bad_formation_spec", "schedule_gap"}


def csv_header(n: int) -> list[str]:
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    ordered = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j]
    cols = ["t"]
    cols += [f"r{i}{c}" for i in range(1, n + 1) for c in "xyz"]
    cols += [f"v{i}{c}" for i in range(1, n + 1) for c in "xyz"]
    cols += [f"zeta_{k}" for k in range(1, 3 * len(pairs) + 1)]
    cols += ["h", "lambda"]
    cols += [f"dist_{i}_{j}" for i, j in pairs]
    cols += [f"speed_{i}_{j}" for i, j in pairs]
    cols += [f"q_{i}" for i in range(1, n + 1)]
    cols += [f"p_{i}_{j}_{c}" for i, j in ordered for c in "xyz"]
    return cols


def _fmt(value) -> str:
    return repr(float(value))


def write_trajectory_csv(log: TrajectoryLog, path: Path, meta: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {meta}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(log.n))
        for k in range(log.t.size):
            row = np.concatenate([[log.t[k]], log.x[k], log.zeta[k], [log.h[k], log.lam[k]],
                                  log.dist[k], log.speed[k], log.q[k], log.p[k].ravel()])
            writer.writerow([_fmt(v) for v in row])


def format_report(rep: ConstraintReport, meta: str) -> str:
    lines = [
        f"# {meta}",
        f"min_distance_m {_fmt(rep.min_distance)}",
        f"max_speed_mps {_fmt(rep.max_speed)}",
        f"max_power_w {_fmt(rep.max_power)}",
        f"min_h {_fmt(rep.min_h)}",
        f"terminal_formation_error_m {_fmt(rep.terminal_formation_error)}",
        "lambda_positive_intervals " + (" ".join(f"[{a:.1f},{b:.1f}]" for a, b in rep.lambda_intervals) or "none"),
        f"violations {len(rep.violations)}",
    ]
    lines += [f"  t={t!r} {kind} {who} value={val!r}" for t, kind, who, val in rep.violations[:50]]
    lines.append("status " + ("ok" if rep.ok else "violation"))
    return "\n".join(lines) + "\n"


def _resolve_scenario(arg: str) -> Path:
    if arg in BUNDLED:
        return bundled_path(arg)
    return Path(arg)


def cmd_run(args) -> int:
    path = _resolve_scenario(args.scenario)
    if not path.is_file():
        raise ScenarioError("--scenario", f"no such file {path}")
    sc = load_scenario(path)
    if args.mode is not None:
        sc.mode = args.mode
    if args.horizon is not None:
        if not args.horizon > 0:
            raise ScenarioError("--horizon", "must be positive")
        sc.horizon = args.horizon
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = f"scenario={sc.name} mode={sc.mode} horizon_s={sc.horizon!r} seed={args.seed}"
    log = Simulation(sc).run()
    rep = monitor(log, sc.r_min, sc.s_max, sc.params.power_cap)
    write_trajectory_csv(log, out / "trajectory.csv", meta)
    (out / "report.txt").write_text(format_report(rep, meta))
    print(f"wrote {out / 'trajectory.csv'} ({log.t.size} rows); "
          f"min distance {rep.min_distance:.4f} m, max speed {rep.max_speed:.5f} m/s, "
          f"max power {rep.max_power:.1f} W, violations {len(rep.violations)}")
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_verify(args) -> int:
    kwargs = {}
    if args.cases is not None:
        kwargs["cases"] = args.cases
    names = SUITES if args.suite == "all" else (args.suite,)
    ok = True
    for name in names:
        res = run_suite(name, seed=args.seed, **kwargs)
        print(res.summary())
        ok &= res.ok
    return EXIT_OK if ok else EXIT_VIOLATION


def read_series(csv_path: Path) -> tuple[list[str], np.ndarray]:
    with open(csv_path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    data = np.array([[float(v) for v in row] for row in reader])
    return header, data


def cmd_plotdata(args) -> int:
    header, data = read_series(Path(args.csv))
    if args.quantity not in header or args.quantity == "t":
        print(f"unknown quantity {args.quantity!r}; valid names: {', '.join(header[1:])}", file=sys.stderr)
        return EXIT_CONFIG
    col = header.index(args.quantity)
    lines = [f"# t {args.quantity}"] + [f"{_fmt(row[0])} {_fmt(row[col])}" for row in data]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emff", description="Electromagnetic formation flying simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write trajectory.csv and report.txt")
    run.add_argument("--scenario", required=True, help=f"scenario file, or one of: {', '.join(BUNDLED)}")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--mode", choices=("averaged", "full"))
    run.add_argument("--horizon", type=float, help="override the horizon in seconds")
    run.add_argument("--seed", type=int, default=0, help="recorded in the output headers")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run a randomized property sweep")
    ver.add_argument("suite", choices=SUITES + ("all",))
    ver.add_argument("--seed", type=int, default=1)
    ver.add_argument("--cases", type=int, help="override the number of cases")
    ver.set_defaults(func=cmd_verify)

    plot = sub.add_parser("plotdata", help="extract a time/value column pair from trajectory.csv")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--quantity", required=True)
    plot.add_argument("--out", help="output file (default: stdout)")
    plot.set_defaults(func=cmd_plotdata)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EMFFError as exc:
        kind = "configuration error" if exc.code in CONFIG_CODES else "numerical failure"
        print(f"{kind} [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG if exc.code in CONFIG_CODES else EXIT_NUMERIC
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
