"""Command-line front end: ``somogsa {suite,run,trace,bench,ecdf,heatmap}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bench, landscape, mogsa, problems
from .biobj import BiObjectiveProblem
from .exceptions import SomogsaError

SEED_ENV = "SOMOGSA_SEED"


class UsageError(Exception):
    pass


def _point(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _problem(args) -> problems.ScalarProblem:
    try:
        base = problems.get_problem(args.problem, args.dim)
    except KeyError:
        raise UsageError(f"unknown problem {args.problem!r}") from None
    return problems.instantiate(base, args.instance)


def _biobj(args, f1: problems.ScalarProblem) -> BiObjectiveProblem:
    center = args.sphere_center
    if center is not None and len(center) != f1.dim:
        raise UsageError(f"--sphere-center needs {f1.dim} coordinates")
    return BiObjectiveProblem(f1, center)


def _mogsa_config(args) -> mogsa.MogsaConfig:
    overrides = {}
    for item in args.mogsa or ():
        if "=" not in item:
            raise UsageError(f"--mogsa expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = bench._override_value(key.strip(), value.strip())
    return mogsa.MogsaConfig().replace(**overrides)


def _start(args, f1) -> np.ndarray:
    start = np.asarray(args.start if args.start is not None else np.zeros(f1.dim), dtype=float)
    if start.shape != (f1.dim,):
        raise UsageError(f"--start needs {f1.dim} coordinates")
    return start


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


# ---------------------------------------------------------------------------
# subcommands


def cmd_suite(args) -> int:
    suite = problems.make_suite(args.dim, include_plateau=args.plateau)
    doc = [p.describe() for p in suite] if args.details else [p.id for p in suite]
    print(json.dumps(doc))
    return 0


def cmd_run(args) -> int:
    f1 = _problem(args)
    log = bench.run_trial(
        args.algo,
        f1,
        _start(args, f1),
        args.budget,
        instance=args.instance,
        seed=args.seed,
        sphere_center=_biobj(args, f1).center,
        mogsa_config=_mogsa_config(args),
    )
    fh, close = _open_out(args.out)
    try:
        bench.write_logs([log], fh)
    finally:
        if close:
            fh.close()
    return 0


def cmd_trace(args) -> int:
    f1 = _problem(args)
    p = _biobj(args, f1)
    cfg = _mogsa_config(args).replace(rng_seed=args.seed)
    result = mogsa.run(p, _start(args, f1), cfg, eval_budget=args.budget)
    fh, close = _open_out(args.out)
    try:
        mogsa.write_trace(result.trace, fh)
    finally:
        if close:
            fh.close()
    return 0


def cmd_bench(args) -> int:
    cfg = bench.load_campaign(args.config)
    logs = bench.run_campaign(cfg, jobs=args.jobs)
    out_dir = Path(args.out_dir) if args.out_dir else Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "runlogs.jsonl"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        bench.write_logs(logs, fh)
    print(json.dumps({"trials": len(logs), "failed": sum(l.failed for l in logs), "runlogs": str(path)}))
    return 0


def cmd_ecdf(args) -> int:
    logs = bench.load_logs(args.logs)
    if args.algo:
        logs = [l for l in logs if l.algorithm == args.algo]
    if args.problem:
        logs = [l for l in logs if l.problem_id.split("_i")[0] == args.problem or l.problem_id == args.problem]
    if not logs:
        raise UsageError("no run logs match the selection")
    grid = None
    if args.points != 64:
        dim = logs[0].dim
        grid = bench.default_eval_grid(max(l.budget for l in logs) / dim, args.points)
    table = bench.ecdf(logs, grid)
    fh, close = _open_out(args.out)
    try:
        table.write_tsv(fh)
    finally:
        if close:
            fh.close()
    return 0


def cmd_heatmap(args) -> int:
    f1 = _problem(args)
    if f1.dim != 2:
        raise UsageError("heatmap needs a two-dimensional problem")
    p = _biobj(args, f1)
    grid = landscape.compute_field(p, landscape.GridSpec(f1.bounds, args.res), backend=args.backend)
    trace = None
    if args.trace:
        with open(args.trace, encoding="utf-8") as fh:
            trace = mogsa.read_trace(fh)
    out = Path(args.out) if args.out else Path(args.out_dir) / landscape.grid_filename(f1.id, args.res, args.format)
    out.parent.mkdir(parents=True, exist_ok=True)
    written = landscape.export_grid(grid, out, args.format, trace)
    summary = {
        "problem": f1.id,
        "resolution": args.res,
        "n_basins": grid.n_basins,
        "sets": [r.to_dict() for r in landscape.ridge_report(grid)],
        "files": [str(w) for w in written],
    }
    print(json.dumps(summary))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--sphere-center", type=_point, default=None, metavar="X,Y", help="sphere center (default -3.5,-2.5)")
    common.add_argument("--dim", type=int, default=2)

    problem = argparse.ArgumentParser(add_help=False)
    problem.add_argument("--problem", required=True)
    problem.add_argument("--instance", type=int, default=0, help="instance seed (0 = untransformed)")

    trial = argparse.ArgumentParser(add_help=False)
    trial.add_argument("--start", type=_point, default=None, metavar="X,Y")
    trial.add_argument("--budget", type=int, default=200_000)
    trial.add_argument("--seed", type=int, default=None, help=f"RNG seed (fallback: ${SEED_ENV}, then 0)")
    trial.add_argument("--mogsa", action="append", metavar="KEY=VALUE", help="MOGSA option override (repeatable)")
    trial.add_argument("--out", default=None, help="output file (default stdout)")

    ap = argparse.ArgumentParser(prog="somogsa", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("suite", parents=[common], help="list the problem suite as JSON")
    s.add_argument("--plateau", action="store_true", help="include the plateau functions")
    s.add_argument("--details", action="store_true", help="emit problem descriptions instead of ids")
    s.set_defaults(func=cmd_suite)

    s = sub.add_parser("run", parents=[common, problem, trial], help="run one trial and write its RunLog")
    s.add_argument("--algo", choices=bench.ALGORITHMS, default="mogsa")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("trace", parents=[common, problem, trial], help="run MOGSA and write its trace as JSON lines")
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("bench", help="run a campaign config and write all RunLogs")
    s.add_argument("--config", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out-dir", default=None, help="overrides output_dir of the config")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("ecdf", help="aggregate RunLogs into an ECDF TSV")
    s.add_argument("logs", nargs="+")
    s.add_argument("--algo", choices=bench.ALGORITHMS, default=None)
    s.add_argument("--problem", default=None)
    s.add_argument("--points", type=int, default=64)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_ecdf)

    s = sub.add_parser("heatmap", parents=[common, problem], help="export the gradient-field landscape")
    s.add_argument("--res", type=int, default=301)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--trace", default=None, help="JSON-lines trace to overlay")
    s.add_argument("--out", default=None)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--backend", choices=("numba", "numpy"), default=None)
    s.set_defaults(func=cmd_heatmap)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    try:
        if getattr(args, "seed", "absent") is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"somogsa: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"somogsa: error: {exc}", file=sys.stderr)
        return 1
    except (SomogsaError, ValueError) as exc:
        print(f"somogsa: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
