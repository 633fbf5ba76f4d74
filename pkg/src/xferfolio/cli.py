"""Command-line entry point.

Subcommands print JSON (or, for ``experiment``, a correlation table) on
stdout; diagnostics go to stderr. Exit codes: 0 success, 2 usage or input
error, 3 solver non-convergence (the best point found is still printed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path
from typing import Sequence

from . import __version__
from .core import Frequency, portfolio_sharpe
from .data_io import (
    Dataset,
    clean_csv,
    load_manifest,
    load_prices_csv,
    load_returns_csv,
    read_manifest,
)
from .errors import XferfolioError
from .experiments import (
    ExperimentConfig,
    correlation_table,
    group_records,
    run_repeated,
    run_synthetic_sweep,
    summarize_grid,
    write_outputs,
)
from .moments import estimate_moments
from .risk import transfer_risk
from .solver import SolverConfig, optimize_direct, optimize_source, optimize_transfer

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3

THREADS_ENV = "XFERFOLIO_THREADS"
RUN_MANIFEST = "run_manifest.json"
DEFAULT_HORIZON = 25200


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # one-line diagnostic, exit 2
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _frequency(text: str) -> Frequency:
    try:
        return Frequency.parse(text)
    except XferfolioError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _nonnegative(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return x


def _threads_default() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    d = SolverConfig()
    g.add_argument("--max-iterations", type=int, default=d.max_iterations)
    g.add_argument("--step-size", type=float, default=d.step_size)
    g.add_argument("--tolerance", type=float, default=d.tolerance)
    g.add_argument("--restarts", type=int, default=d.restarts)
    g.add_argument("--solver-seed", type=int, default=d.seed)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(max_iterations=args.max_iterations, step_size=args.step_size,
                        tolerance=args.tolerance, restarts=args.restarts, seed=args.solver_seed)


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--frequency", type=_frequency, default=Frequency.DAY_1,
                   help="bar frequency of every input file (default 1-day)")
    p.add_argument("--prices", action="store_true",
                   help="input files hold prices rather than returns")


def _load(path: str, args, frequency: Frequency | None = None) -> Dataset:
    loader = load_prices_csv if args.prices else load_returns_csv
    return loader(path, frequency or args.frequency)


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xferfolio", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("optimize", help="maximum-Sharpe long-only portfolio")
    p.add_argument("--returns", required=True, help="returns (or prices) CSV")
    _add_input_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("transfer", help="pretrain on a source, fine-tune on a target")
    p.add_argument("--source", required=True)
    p.add_argument("--target-train", required=True)
    p.add_argument("--target-test", required=True)
    p.add_argument("--lambda", dest="lam", type=_nonnegative, default=0.2)
    p.add_argument("--source-frequency", type=_frequency, default=None)
    p.add_argument("--risk-moments", choices=("target_test", "target_train"), default="target_test")
    _add_input_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("risk", help="transfer risk of a source against a target")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--source-frequency", type=_frequency, default=None)
    p.add_argument("--r2-weight", type=_nonnegative, default=1.0)
    _add_input_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("experiment", help="repeated transfer experiments and correlation tables")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--manifest", help="dataset manifest JSON")
    mode.add_argument("--synthetic", action="store_true", help="synthetic similarity sweep")
    mode.add_argument("--replay", metavar="RUN_MANIFEST", help="re-run from a run manifest")
    p.add_argument("--similarity-sweep", action="store_true",
                   help="draw similarity uniformly per repetition (the only synthetic mode)")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.add_argument("--assets", type=int, default=10, help="assets per universe")
    p.add_argument("--lambda", dest="lam", type=_nonnegative, default=0.2)
    p.add_argument("--risk-moments", choices=("target_test", "target_train"), default="target_test")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON,
                   help="synthetic periods per market (default %(default)s)")
    p.add_argument("--synthetic-frequency", type=_frequency, default=Frequency.DAY_1)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker processes (default ${THREADS_ENV} or CPU count)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("clean", help="drop incomplete or non-numeric rows from a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_clean)
    return parser


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_optimize(args) -> int:
    ds = _load(args.returns, args)
    m = estimate_moments(ds.series, exclude_overnight=True)
    res = optimize_direct(m, _solver_config(args))
    _print_json({
        "asset_ids": list(ds.asset_ids),
        "weights": res.portfolio.to_list(),
        "sharpe": portfolio_sharpe(res.portfolio, m),
        "converged": res.converged,
        "iterations": res.iterations_used,
    })
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_transfer(args) -> int:
    cfg = _solver_config(args)
    source = _load(args.source, args, args.source_frequency)
    train = _load(args.target_train, args)
    test = _load(args.target_test, args)
    source_m = estimate_moments(source.series, exclude_overnight=True)
    train_m = estimate_moments(train.series, exclude_overnight=True)
    test_m = estimate_moments(test.series, exclude_overnight=True)

    pre = optimize_source(source_m, cfg)
    direct = optimize_direct(train_m, cfg)
    trans = optimize_transfer(train_m, pre.portfolio, args.lam, cfg)
    risk_m = test_m if args.risk_moments == "target_test" else train_m
    risk = transfer_risk(pre.portfolio, source_m, risk_m)
    converged = pre.converged and direct.converged and trans.converged
    _print_json({
        "source_asset_ids": list(source.asset_ids),
        "target_asset_ids": list(train.asset_ids),
        "lambda": args.lam,
        "pretrained_weights": pre.portfolio.to_list(),
        "transferred_weights": trans.portfolio.to_list(),
        "direct_weights": direct.portfolio.to_list(),
        "sharpe_transfer": portfolio_sharpe(trans.portfolio, test_m),
        "sharpe_direct": portfolio_sharpe(direct.portfolio, test_m),
        "transfer_risk": risk.to_dict(),
        "converged": converged,
    })
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_risk(args) -> int:
    source = _load(args.source, args, args.source_frequency)
    target = _load(args.target, args)
    source_m = estimate_moments(source.series, exclude_overnight=True)
    target_m = estimate_moments(target.series, exclude_overnight=True)
    pre = optimize_source(source_m, _solver_config(args))
    report = transfer_risk(pre.portfolio, source_m, target_m, args.r2_weight)
    _print_json(report.to_dict())
    return EXIT_OK if pre.converged else EXIT_NONCONVERGED


def cmd_clean(args) -> int:
    kept, dropped = clean_csv(args.input, args.output)
    _print_json({"kept": kept, "dropped": dropped, "output": args.output})
    return EXIT_OK


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _experiment_plan(args) -> dict:
    """Resolve flags (or a run manifest) into a replayable plan."""
    if args.replay:
        plan = json.loads(Path(args.replay).read_text())
        if plan.get("tool") != "xferfolio" or "config" not in plan:
            raise XferfolioError(f"{args.replay} is not an xferfolio run manifest")
        if args.out:
            plan["output_dir"] = args.out
        return plan
    if args.reps < 2:
        raise XferfolioError("need ≥ 2 repetitions")
    if not args.out:
        raise XferfolioError("--out is required")
    cfg = ExperimentConfig(n_repetitions=args.reps, n_assets=args.assets, lam=args.lam,
                           seed=args.seed, solver=_solver_config(args),
                           risk_moment_source=args.risk_moments)
    plan = {"tool": "xferfolio", "version": __version__, "config": cfg.to_dict(),
            "output_dir": args.out}
    if args.synthetic:
        plan["mode"] = "synthetic"
        plan["synthetic"] = {"horizon_periods": args.horizon,
                             "frequency": args.synthetic_frequency.value}
    else:
        plan["mode"] = "manifest"
        plan["dataset_manifest"] = str(Path(args.manifest).resolve())
        plan["datasets"] = [e.to_dict() for e in read_manifest(args.manifest)]
    return plan


def _run_plan(plan: dict, workers: int):
    cfg = ExperimentConfig.from_dict(plan["config"])
    if plan["mode"] == "synthetic":
        syn = plan["synthetic"]
        records = run_synthetic_sweep(cfg, int(syn["horizon_periods"]),
                                      Frequency.parse(syn["frequency"]), workers)
        return records
    grouped = load_manifest(plan["dataset_manifest"])
    sources, trains, tests = (grouped[r] for r in ("source_train", "target_train", "target_test"))
    if not sources or not trains:
        raise XferfolioError("manifest needs source_train and target_train datasets")
    missing = sorted(set(trains) ^ set(tests))
    if missing:
        raise XferfolioError(f"target labels without both train and test data: {missing}")
    records = []
    for src in sources.values():
        for label, train in trains.items():
            records.extend(run_repeated(src, train, tests[label], cfg, workers))
    return records


def cmd_experiment(args) -> int:
    started = time.perf_counter()
    plan = _experiment_plan(args)
    workers = args.threads if args.threads is not None else _threads_default()
    out = Path(plan["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".xferfolio-", dir=out))
    try:
        records = _run_plan(plan, max(1, workers))
        summary = summarize_grid(group_records(records))
        written = write_outputs(stage, records, summary)
        manifest = dict(plan)
        manifest["outputs"] = {p.name: _sha256(p) for p in written}
        manifest["threads"] = workers
        manifest["wall_clock_seconds"] = round(time.perf_counter() - started, 3)
        (stage / RUN_MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
        for p in [*written, stage / RUN_MANIFEST]:
            os.replace(p, out / p.name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    sys.stdout.write(correlation_table(summary))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (XferfolioError, OSError, KeyError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
        print(f"xferfolio {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
