"""Political-stance metrics: per-iteration MPS, preference-level UMPS, and
per-epoch per-group aggregation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .behavior import InteractionRecord
from .corpus import ArticleUtility, Typology, UserProfile

# Column s of a preference/utility matrix corresponds to stance value s - 2.
STANCE_COLUMN_VALUES = np.arange(-2.0, 3.0)


@dataclass(frozen=True)
class IterationMetric:
    """MPS of a single recommendation interaction (None when nothing was clicked)."""

    iteration: int
    epoch: int
    user_id: int
    group: Typology
    mps: float | None
    n_clicks: int


@dataclass(frozen=True)
class MetricsRow:
    """Per-epoch per-group aggregate; mean_mps is None when the group had no
    clicked interactions in the epoch."""

    run_id: int
    epoch: int
    group: Typology
    mean_mps: float | None
    mean_umps: float
    n_clicks: int
    n_interactions: int


def iteration_mps(stances: Sequence[int], clicks: Sequence[int]) -> float | None:
    """Average stance of the clicked positions; None when no position was clicked."""
    if len(stances) != len(clicks):
        raise ValueError(f"length mismatch: {len(stances)} stances vs {len(clicks)} clicks")
    total = 0
    weighted = 0.0
    for stance, clicked in zip(stances, clicks):
        total += clicked
        weighted += clicked * int(stance)
    if total == 0:
        return None
    return weighted / total


def umps(preference: np.ndarray) -> float:
    """Stance-weighted sum over all preference cells: sum_s sum_t s * U[t, s]."""
    return float((preference @ STANCE_COLUMN_VALUES).sum())


def epoch_group_aggregate(
    iteration_records: Iterable[IterationMetric],
    users: Sequence[UserProfile],
    epoch: int,
    run_id: int = 0,
) -> list[MetricsRow]:
    """One row per group: mean of defined iteration MPS values over the epoch,
    and mean UMPS over the group's members at the current (epoch-end) state."""
    by_group_mps: dict[Typology, list[float]] = {g: [] for g in Typology}
    by_group_clicks: dict[Typology, int] = {g: 0 for g in Typology}
    by_group_visits: dict[Typology, int] = {g: 0 for g in Typology}
    for record in iteration_records:
        if record.epoch != epoch:
            continue
        by_group_visits[record.group] += 1
        by_group_clicks[record.group] += record.n_clicks
        if record.mps is not None:
            by_group_mps[record.group].append(record.mps)

    group_umps: dict[Typology, list[float]] = {g: [] for g in Typology}
    for user in users:
        group_umps[user.typology].append(umps(user.preference))

    rows = []
    for group in Typology:
        mps_values = by_group_mps[group]
        mean_mps = float(np.mean(mps_values)) if mps_values else None
        rows.append(
            MetricsRow(
                run_id=run_id,
                epoch=epoch,
                group=group,
                mean_mps=mean_mps,
                mean_umps=float(np.mean(group_umps[group])),
                n_clicks=by_group_clicks[group],
                n_interactions=by_group_visits[group],
            )
        )
    return rows


def bootstrap_reference(
    bootstrap_records: Iterable[InteractionRecord],
    users: Sequence[UserProfile],
    articles: Sequence[ArticleUtility],
) -> dict[Typology, float | None]:
    """Per-group mean stance of bootstrap-clicked articles.

    This is the "true initial political stance" reference line; a group with
    zero bootstrap clicks gets None (with a warning).
    """
    group_of: Mapping[int, Typology] = {u.user_id: u.typology for u in users}
    stance_of = {a.article_id: int(a.stance) for a in articles}
    sums: dict[Typology, float] = {g: 0.0 for g in Typology}
    counts: dict[Typology, int] = {g: 0 for g in Typology}
    for record in bootstrap_records:
        if record.clicked:
            group = group_of[record.user_id]
            sums[group] += stance_of[record.article_id]
            counts[group] += 1
    reference: dict[Typology, float | None] = {}
    for group in Typology:
        if counts[group] == 0:
            warnings.warn(f"group {group.value} has no bootstrap clicks; reference undefined")
            reference[group] = None
        else:
            reference[group] = sums[group] / counts[group]
    return reference
