"""CSV readers and writers for every on-disk artifact.

All files: comma-separated, one header row, LF-terminated lines, reals as
decimal-point strings with 9 significant digits. Formatting is centralized
here so that initial and final snapshots of the same data are byte-comparable.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .behavior import InteractionRecord
from .corpus import N_STANCES, N_TOPICS, ArticleUtility, Stance, Typology, UserProfile
from .errors import ConfigError
from .metrics import MetricsRow
from .recommender import MFModel
from .simulation import AggregateRow, RunResult

ARTICLES_FILE = "articles.csv"
USERS_FILE = "users.csv"
INTERACTIONS_FILE = "interactions.csv"
METRICS_FILE = "metrics_epoch.csv"
USERS_FINAL_FILE = "users_final.csv"
BOOTSTRAP_REFERENCE_FILE = "bootstrap_reference.csv"
AGGREGATE_FILE = "aggregate.csv"
MANIFEST_FILE = "manifest.json"
RUNS_DIR = "runs"


def fmt(value: float) -> str:
    """A real number at 9 significant digits."""
    return format(float(value), ".9g")


def write_lines(path: Path, header: str, lines: Iterable[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for line in lines:
            fh.write(line + "\n")


def _read_rows(path: Path, expected_header: str) -> list[list[str]]:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0] != expected_header:
        raise ConfigError(f"{path}: expected header {expected_header!r}")
    return [line.split(",") for line in lines[1:]]


# -- corpus ------------------------------------------------------------------

ARTICLES_HEADER = "article_id,stance,topics"


def write_articles(path: Path, articles: Sequence[ArticleUtility]) -> None:
    write_lines(
        Path(path),
        ARTICLES_HEADER,
        (
            f"{a.article_id},{int(a.stance)},{';'.join(str(t) for t in a.topics)}"
            for a in articles
        ),
    )


def read_articles(path: Path) -> list[ArticleUtility]:
    articles = []
    for row in _read_rows(Path(path), ARTICLES_HEADER):
        article_id, stance, topics = row
        articles.append(
            ArticleUtility(int(article_id), tuple(int(t) for t in topics.split(";")), Stance(int(stance)))
        )
    return articles


USERS_HEADER = "user_id,typology," + ",".join(
    f"p_{t}_{s}" for t in range(N_TOPICS) for s in range(N_STANCES)
)


def write_users(path: Path, users: Sequence[UserProfile]) -> None:
    write_lines(
        Path(path),
        USERS_HEADER,
        (
            f"{u.user_id},{u.typology.value}," + ",".join(fmt(x) for x in u.preference.ravel())
            for u in users
        ),
    )


def users_csv_bytes(users: Sequence[UserProfile]) -> bytes:
    """The exact bytes write_users would produce (for byte-identity checks)."""
    lines = [USERS_HEADER]
    lines.extend(
        f"{u.user_id},{u.typology.value}," + ",".join(fmt(x) for x in u.preference.ravel())
        for u in users
    )
    return ("\n".join(lines) + "\n").encode()


def read_users(path: Path) -> list[UserProfile]:
    users = []
    for row in _read_rows(Path(path), USERS_HEADER):
        user_id, typology = row[0], row[1]
        cells = np.array([float(x) for x in row[2:]]).reshape(N_TOPICS, N_STANCES)
        users.append(UserProfile(int(user_id), Typology(typology), cells))
    return users


# -- run outputs ---------------------------------------------------------------

INTERACTIONS_HEADER = "run_id,iteration,epoch,user_id,article_id,position,clicked,phase"


def write_interactions(path: Path, records: Iterable[InteractionRecord]) -> None:
    write_lines(
        Path(path),
        INTERACTIONS_HEADER,
        (
            f"{r.run_id},{r.iteration},{r.epoch},{r.user_id},{r.article_id},{r.position},{r.clicked},{r.phase}"
            for r in records
        ),
    )


METRICS_HEADER = "run_id,epoch,group,mean_mps,mean_umps,n_clicks,n_interactions"


def write_metrics_epoch(path: Path, rows: Sequence[MetricsRow]) -> None:
    write_lines(
        Path(path),
        METRICS_HEADER,
        (
            f"{r.run_id},{r.epoch},{r.group.value},"
            f"{'' if r.mean_mps is None else fmt(r.mean_mps)},{fmt(r.mean_umps)},"
            f"{r.n_clicks},{r.n_interactions}"
            for r in rows
        ),
    )


def read_metrics_epoch(path: Path) -> list[MetricsRow]:
    rows = []
    for row in _read_rows(Path(path), METRICS_HEADER):
        run_id, epoch, group, mean_mps, mean_umps, n_clicks, n_interactions = row
        rows.append(
            MetricsRow(
                run_id=int(run_id),
                epoch=int(epoch),
                group=Typology(group),
                mean_mps=None if mean_mps == "" else float(mean_mps),
                mean_umps=float(mean_umps),
                n_clicks=int(n_clicks),
                n_interactions=int(n_interactions),
            )
        )
    return rows


REFERENCE_HEADER = "run_id,group,bootstrap_mps"


def write_bootstrap_reference(path: Path, run_id: int, reference: Mapping[Typology, float | None]) -> None:
    write_lines(
        Path(path),
        REFERENCE_HEADER,
        (
            f"{run_id},{group.value},{'' if reference[group] is None else fmt(reference[group])}"
            for group in Typology
        ),
    )


def read_bootstrap_reference(path: Path) -> tuple[int, dict[Typology, float | None]]:
    reference: dict[Typology, float | None] = {}
    run_id = 0
    for row in _read_rows(Path(path), REFERENCE_HEADER):
        run_id = int(row[0])
        reference[Typology(row[1])] = None if row[2] == "" else float(row[2])
    return run_id, reference


AGGREGATE_HEADER = "epoch,group,metric,mean,std"


def write_aggregate(path: Path, rows: Sequence[AggregateRow]) -> None:
    write_lines(
        Path(path),
        AGGREGATE_HEADER,
        (f"{r.epoch},{r.group.value},{r.metric},{fmt(r.mean)},{fmt(r.std)}" for r in rows),
    )


def read_aggregate(path: Path) -> list[AggregateRow]:
    rows = []
    for row in _read_rows(Path(path), AGGREGATE_HEADER):
        epoch, group, metric, mean, std = row
        if metric not in ("mps", "umps"):
            raise ConfigError(f"{path}: unknown metric {metric!r}")
        rows.append(AggregateRow(int(epoch), Typology(group), metric, float(mean), float(std)))
    return rows


def model_dump_path(run_dir: Path, epoch: int) -> Path:
    return Path(run_dir) / f"model_epoch{epoch}.csv"


def write_model_dump(path: Path, model: MFModel) -> None:
    dim = model.user_vectors.shape[1]
    header = "entity,id," + ",".join(f"dim{d}" for d in range(dim))

    def lines():
        for i, vec in enumerate(model.user_vectors):
            yield f"user,{i}," + ",".join(fmt(x) for x in vec)
        for i, vec in enumerate(model.item_vectors):
            yield f"item,{i}," + ",".join(fmt(x) for x in vec)

    write_lines(Path(path), header, lines())


def run_dir(out_dir: Path, run_id: int) -> Path:
    return Path(out_dir) / RUNS_DIR / str(run_id)


def write_run_outputs(out_dir: Path, result: RunResult) -> None:
    """Persist one run: interactions, per-epoch metrics, reference line, final users."""
    directory = run_dir(out_dir, result.run_id)
    write_interactions(directory / INTERACTIONS_FILE, result.log.records)
    write_metrics_epoch(directory / METRICS_FILE, result.rows)
    write_bootstrap_reference(directory / BOOTSTRAP_REFERENCE_FILE, result.run_id, result.bootstrap_mps)
    write_users(directory / USERS_FINAL_FILE, result.users_final)


# -- manifest ------------------------------------------------------------------


def config_hash(config_text: str) -> str:
    return hashlib.sha256(config_text.encode()).hexdigest()


def write_manifest(out_dir: Path, command: str, config_text: str, seeds: Sequence[int]) -> None:
    """Reproducibility record: no timestamps, so reruns stay byte-identical."""
    payload = {
        "artifact": "bubblesim",
        "version": __version__,
        "command": command,
        "config_sha256": config_hash(config_text),
        "config": config_text,
        "seeds": list(seeds),
    }
    path = Path(out_dir) / MANIFEST_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_manifest(out_dir: Path) -> dict:
    return json.loads((Path(out_dir) / MANIFEST_FILE).read_text())
