"""Disk-backed experiment orchestration: the CLI's glue between the engine
and the CSV artifacts.

The corpus and population live as CSV files in the experiment directory and
are reloaded from disk for every run, so a rerun sees exactly the same
(9-significant-digit) starting state the files record.
"""

from __future__ import annotations

import concurrent.futures
import functools
from pathlib import Path
from typing import Sequence

from . import csvio
from .corpus import Typology
from .errors import ConfigError
from .simulation import (
    AggregateResult,
    AggregateRow,
    ExperimentConfig,
    RunSeries,
    World,
    aggregate_series,
    build_world,
    run_experiment,
    run_series,
)


def ensure_world_files(config: ExperimentConfig, out_dir: Path) -> None:
    """Write articles.csv / users.csv from base_seed unless already present."""
    out_dir = Path(out_dir)
    articles_path = out_dir / csvio.ARTICLES_FILE
    users_path = out_dir / csvio.USERS_FILE
    if articles_path.exists() and users_path.exists():
        return
    world = build_world(config)
    csvio.write_articles(articles_path, world.articles)
    csvio.write_users(users_path, world.users)


def load_world(out_dir: Path) -> World:
    out_dir = Path(out_dir)
    return World(
        articles=csvio.read_articles(out_dir / csvio.ARTICLES_FILE),
        users=csvio.read_users(out_dir / csvio.USERS_FILE),
    )


def _execute_one(out_dir: str, config: ExperimentConfig, seed: int) -> RunSeries:
    world = load_world(Path(out_dir))
    directory = csvio.run_dir(Path(out_dir), seed)
    model_sink = None
    if config.dump_models:
        def model_sink(epoch, model):
            csvio.write_model_dump(csvio.model_dump_path(directory, epoch), model)
    result = run_experiment(config, seed, world, model_sink=model_sink)
    csvio.write_run_outputs(Path(out_dir), result)
    return run_series(result)


def execute_runs(config: ExperimentConfig, out_dir: Path, workers: int | None = None) -> list[Path]:
    """All repeats against the on-disk world; returns the run directories."""
    config.validate()
    ensure_world_files(config, out_dir)
    seeds = list(range(config.base_seed, config.base_seed + config.repeats))
    task = functools.partial(_execute_one, str(out_dir), config)
    n_workers = config.workers if workers is None else workers
    if n_workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(task, seeds))
    else:
        for seed in seeds:
            task(seed)
    return [csvio.run_dir(out_dir, seed) for seed in seeds]


def aggregate_run_dirs(run_dirs: Sequence[Path]) -> AggregateResult:
    """Aggregate from the per-run CSV files (the one path that feeds aggregate.csv)."""
    if not run_dirs:
        raise ConfigError("no run directories given")
    series = []
    for directory in run_dirs:
        directory = Path(directory)
        metrics_path = directory / csvio.METRICS_FILE
        reference_path = directory / csvio.BOOTSTRAP_REFERENCE_FILE
        if not metrics_path.exists():
            raise ConfigError(f"not a run directory (no {csvio.METRICS_FILE}): {directory}")
        rows = csvio.read_metrics_epoch(metrics_path)
        run_id, reference = csvio.read_bootstrap_reference(reference_path)
        if rows and rows[0].run_id != run_id:
            raise ConfigError(f"{directory}: run ids disagree between metrics and reference files")
        series.append(RunSeries(run_id, tuple(rows), reference))
    if len({s.run_id for s in series}) != len(series):
        raise ConfigError("duplicate run ids across run directories")
    return aggregate_series(series)


# -- plot-data export ----------------------------------------------------------


def _pivot(rows: Sequence[AggregateRow], metric: str) -> tuple[list[int], dict[tuple[int, Typology], AggregateRow]]:
    epochs = sorted({r.epoch for r in rows if r.epoch > 0})
    table = {(r.epoch, r.group): r for r in rows if r.metric == metric}
    return epochs, table


def _reference_of(rows: Sequence[AggregateRow]) -> dict[Typology, float | None]:
    reference: dict[Typology, float | None] = {g: None for g in Typology}
    for r in rows:
        if r.epoch == 0 and r.metric == "mps":
            reference[r.group] = r.mean
    return reference


def _cell(row: AggregateRow | None) -> str:
    if row is None:
        return ","
    return f"{csvio.fmt(row.mean)},{csvio.fmt(row.std)}"


def write_fig_mps(path: Path, rows: Sequence[AggregateRow]) -> None:
    """Per-epoch MPS curves for all groups plus the bootstrap reference columns."""
    epochs, table = _pivot(rows, "mps")
    reference = _reference_of(rows)
    header = "epoch," + ",".join(f"{g.value}_mean,{g.value}_std" for g in Typology)
    header += "," + ",".join(f"{g.value}_ref" for g in Typology)
    lines = []
    for epoch in epochs:
        cells = [_cell(table.get((epoch, g))) for g in Typology]
        refs = ["" if reference[g] is None else csvio.fmt(reference[g]) for g in Typology]
        lines.append(f"{epoch}," + ",".join(cells) + "," + ",".join(refs))
    csvio.write_lines(Path(path), header, lines)


def write_fig_umps(path: Path, rows: Sequence[AggregateRow]) -> None:
    epochs, table = _pivot(rows, "umps")
    header = "epoch," + ",".join(f"{g.value}_mean,{g.value}_std" for g in Typology)
    lines = []
    for epoch in epochs:
        cells = [_cell(table.get((epoch, g))) for g in Typology]
        lines.append(f"{epoch}," + ",".join(cells))
    csvio.write_lines(Path(path), header, lines)


def write_fig_calibration(
    path: Path,
    baseline: Sequence[AggregateRow],
    calibrated: Sequence[AggregateRow],
) -> None:
    """Per-group MPS curves of a baseline and a calibrated aggregate, joined by epoch."""
    base_epochs, base_table = _pivot(baseline, "mps")
    cal_epochs, cal_table = _pivot(calibrated, "mps")
    if base_epochs != cal_epochs:
        raise ConfigError(
            f"mismatched epoch ranges: baseline has {len(base_epochs)} epochs "
            f"({base_epochs[:1]}..{base_epochs[-1:]}), calibrated has {len(cal_epochs)} "
            f"({cal_epochs[:1]}..{cal_epochs[-1:]})"
        )
    header = "epoch," + ",".join(
        f"{g.value}_baseline_mean,{g.value}_baseline_std,"
        f"{g.value}_calibrated_mean,{g.value}_calibrated_std"
        for g in Typology
    )
    lines = []
    for epoch in base_epochs:
        cells = []
        for g in Typology:
            cells.append(_cell(base_table.get((epoch, g))))
            cells.append(_cell(cal_table.get((epoch, g))))
        lines.append(f"{epoch}," + ",".join(cells))
    csvio.write_lines(Path(path), header, lines)
