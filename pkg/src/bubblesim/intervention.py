"""Calibrated re-ranking: greedily trade predicted relevance against the KL
divergence between a list's stance distribution and a per-user target."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .corpus import N_STANCES, ArticleUtility

# Smoothing used when a calibration target is built from bootstrap clicks.
BOOTSTRAP_TARGET_SMOOTHING = 0.5


@dataclass(frozen=True)
class StanceDistribution:
    """Probability over the five stances, indexed by stance column 0..4."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if len(probs) != N_STANCES:
            raise ValueError(f"expected {N_STANCES} probabilities, got {len(probs)}")
        if any(p < 0 for p in probs):
            raise ValueError("stance probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"stance probabilities sum to {sum(probs)!r}, expected 1")
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class CalibrationParams:
    """Relevance/calibration trade-off (lam), KL smoothing, and candidate pool size."""

    lam: float = 0.9
    alpha: float = 0.01
    candidate_pool: int = 50

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.candidate_pool < 1:
            raise ValueError(f"candidate_pool must be >= 1, got {self.candidate_pool}")


def stance_distribution(
    clicked_articles: Sequence[ArticleUtility],
    smoothing: float,
) -> StanceDistribution:
    """Additively smoothed stance histogram of a click list."""
    if smoothing < 0:
        raise ValueError(f"smoothing must be nonnegative, got {smoothing}")
    counts = [0] * N_STANCES
    for article in clicked_articles:
        counts[article.stance.index] += 1
    total = len(clicked_articles) + N_STANCES * smoothing
    if total == 0:
        raise ValueError("empty click list with zero smoothing: distribution undefined")
    return StanceDistribution(tuple((c + smoothing) / total for c in counts))


def calibration_divergence(
    target: StanceDistribution,
    list_dist: StanceDistribution,
    alpha: float,
) -> float:
    """KL(target || q~) with q~ = (1 - alpha) * list_dist + alpha * target.

    Zero-probability target stances contribute nothing; the alpha mixing keeps
    every surviving term finite.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    kl = 0.0
    for p, q in zip(target.probs, list_dist.probs):
        if p > 0:
            # q + alpha*(p - q) equals (1-alpha)*q + alpha*p but is exact when p == q.
            kl += p * math.log(p / (q + alpha * (p - q)))
    return kl if kl > 0.0 else 0.0


def _list_distribution(counts: Sequence[int], size: int) -> StanceDistribution:
    return StanceDistribution(tuple(c / size for c in counts))


def normalize_relevances(relevances: Sequence[float]) -> list[float]:
    """Min-max over the candidate pool; a constant pool maps to all 0.5."""
    lo = min(relevances)
    hi = max(relevances)
    if hi > lo:
        return [(r - lo) / (hi - lo) for r in relevances]
    return [0.5] * len(relevances)


def calibrated_rerank(
    candidates: Sequence[tuple[ArticleUtility, float]],
    target: StanceDistribution,
    params: CalibrationParams,
    k: int,
) -> list[int]:
    """Greedy k-item selection from a relevance-ranked candidate pool.

    At each step the candidate maximizing
    (1 - lam) * sum(normalized relevance) - lam * KL(target || list distribution)
    joins the list; ties go to the lower article id. The returned ids are
    ordered by raw relevance descending for display.
    """
    if len(candidates) < k:
        raise ValueError(f"need at least {k} candidates, got {len(candidates)}")
    norm = normalize_relevances([rel for _, rel in candidates])

    chosen: list[int] = []
    taken = [False] * len(candidates)
    counts = [0] * N_STANCES
    relevance_sum = 0.0
    for step in range(1, k + 1):
        best_idx = -1
        best_value = -math.inf
        best_id = -1
        for idx, (article, _) in enumerate(candidates):
            if taken[idx]:
                continue
            counts[article.stance.index] += 1
            kl = calibration_divergence(target, _list_distribution(counts, step), params.alpha)
            counts[article.stance.index] -= 1
            value = (1.0 - params.lam) * (relevance_sum + norm[idx]) - params.lam * kl
            if value > best_value or (value == best_value and article.article_id < best_id):
                best_idx = idx
                best_value = value
                best_id = article.article_id
        taken[best_idx] = True
        chosen.append(best_idx)
        counts[candidates[best_idx][0].stance.index] += 1
        relevance_sum += norm[best_idx]

    chosen.sort(key=lambda idx: (-candidates[idx][1], candidates[idx][0].article_id))
    return [candidates[idx][0].article_id for idx in chosen]
