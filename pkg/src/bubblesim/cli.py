"""Command-line entry point: generate, run, aggregate, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import csvio, runner
from .config import PRESETS, load_config, resolved_config_text
from .errors import BubblesimError, ConfigError
from .simulation import ExperimentConfig


def _add_common(parser: argparse.ArgumentParser, out_required: bool = True) -> None:
    parser.add_argument("--config", type=Path, default=None, help="experiment config file (INI)")
    parser.add_argument("--out", type=Path, required=out_required, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override base_seed")
    parser.add_argument("--preset", choices=sorted(PRESETS), default=None,
                        help="start from a shipped preset before applying --config")
    parser.add_argument("--dry-run", action="store_true",
                        help="validate inputs and print the resolved plan without writing anything")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bubblesim",
        description="Simulate the closed loop between a news recommender and a drifting user population.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_generate = sub.add_parser("generate", help="write articles.csv and users.csv")
    _add_common(p_generate)

    p_run = sub.add_parser("run", help="execute all repeats and aggregate them")
    _add_common(p_run)

    p_aggregate = sub.add_parser("aggregate", help="aggregate existing run directories")
    _add_common(p_aggregate)
    p_aggregate.add_argument("run_dirs", nargs="+", type=Path, help="per-run output directories")

    p_report = sub.add_parser("report", help="export plot-ready CSVs from aggregates")
    _add_common(p_report)
    p_report.add_argument("aggregates", nargs="+", type=Path,
                          help="aggregate.csv paths (one, or baseline then calibrated)")
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(args.config, args.preset, args.seed)


def _print_plan(config: ExperimentConfig, command: str, out: Path, extra: list[str] | None = None) -> None:
    seeds = list(range(config.base_seed, config.base_seed + config.repeats))
    print(f"plan: {command} -> {out}")
    print(f"  corpus: {config.corpus.n_articles} articles, users: {config.n_users}")
    print(f"  iterations: {config.iterations} ({config.n_epochs} epochs of {config.retrain_every})")
    print(f"  influence c: {config.drift.influence}, calibration: "
          f"{'on' if config.calibration_enabled else 'off'}")
    print(f"  seeds: {seeds[0]}..{seeds[-1]} ({config.repeats} repeats, {config.workers} worker(s))")
    for line in extra or []:
        print(f"  {line}")


def cmd_generate(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.dry_run:
        _print_plan(config, "generate", args.out,
                    [f"writes: {csvio.ARTICLES_FILE}, {csvio.USERS_FILE}, {csvio.MANIFEST_FILE}"])
        return 0
    runner.ensure_world_files(config, args.out)
    csvio.write_manifest(args.out, "generate", resolved_config_text(config), [config.base_seed])
    print(f"wrote {args.out / csvio.ARTICLES_FILE} and {args.out / csvio.USERS_FILE}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    seeds = list(range(config.base_seed, config.base_seed + config.repeats))
    if args.dry_run:
        _print_plan(config, "run", args.out,
                    [f"run dirs: {csvio.run_dir(args.out, s)}" for s in seeds])
        return 0
    run_dirs = runner.execute_runs(config, args.out)
    aggregate = runner.aggregate_run_dirs(run_dirs)
    csvio.write_aggregate(args.out / csvio.AGGREGATE_FILE, aggregate.rows)
    csvio.write_manifest(args.out, "run", resolved_config_text(config), seeds)
    print(f"completed {config.repeats} run(s); wrote {args.out / csvio.AGGREGATE_FILE}")
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    description = "aggregate\n" + "\n".join(str(d) for d in args.run_dirs) + "\n"
    if args.dry_run:
        print(f"plan: aggregate {len(args.run_dirs)} run dir(s) -> {args.out / csvio.AGGREGATE_FILE}")
        for d in args.run_dirs:
            print(f"  {d}")
        return 0
    aggregate = runner.aggregate_run_dirs(args.run_dirs)
    csvio.write_aggregate(args.out / csvio.AGGREGATE_FILE, aggregate.rows)
    csvio.write_manifest(args.out, "aggregate", description, aggregate.seeds)
    print(f"wrote {args.out / csvio.AGGREGATE_FILE}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if len(args.aggregates) > 2:
        raise ConfigError("report takes one aggregate, or two (baseline then calibrated)")
    description = "report\n" + "\n".join(str(p) for p in args.aggregates) + "\n"
    if args.dry_run:
        names = ["fig_mps.csv", "fig_umps.csv"] + (["fig_calibration.csv"] if len(args.aggregates) == 2 else [])
        print(f"plan: report {len(args.aggregates)} aggregate(s) -> {args.out} ({', '.join(names)})")
        return 0
    baseline = csvio.read_aggregate(args.aggregates[0])
    runner.write_fig_mps(args.out / "fig_mps.csv", baseline)
    runner.write_fig_umps(args.out / "fig_umps.csv", baseline)
    written = ["fig_mps.csv", "fig_umps.csv"]
    if len(args.aggregates) == 2:
        calibrated = csvio.read_aggregate(args.aggregates[1])
        runner.write_fig_calibration(args.out / "fig_calibration.csv", baseline, calibrated)
        written.append("fig_calibration.csv")
    csvio.write_manifest(args.out, "report", description, [])
    print(f"wrote {', '.join(str(args.out / name) for name in written)}")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "aggregate": cmd_aggregate,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BubblesimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
