"""User-side mechanics: preference scoring, click draws, and preference drift."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import ArticleUtility, UserProfile

PHASE_BOOTSTRAP = "bootstrap"
PHASE_LIVE = "live"


@dataclass(frozen=True)
class ClickModelParams:
    """Logistic link from per-topic-normalized preference score to click probability."""

    steepness: float = 10.0
    midpoint: float = 0.3

    def __post_init__(self):
        if not self.steepness > 0:
            raise ValueError(f"steepness must be positive, got {self.steepness}")
        if not 0.0 <= self.midpoint <= 1.0:
            raise ValueError(f"midpoint must be in [0, 1], got {self.midpoint}")


@dataclass(frozen=True)
class DriftConfig:
    """How strongly a clicked article pulls the user's preference toward it."""

    influence: float = 0.0

    def __post_init__(self):
        if self.influence < 0:
            raise ValueError(f"influence must be nonnegative, got {self.influence}")


@dataclass(frozen=True)
class InteractionRecord:
    """One exposure event; iteration 0 / epoch 0 marks the bootstrap phase."""

    run_id: int
    iteration: int
    epoch: int
    user_id: int
    article_id: int
    position: int
    clicked: int
    phase: str


class InteractionLog:
    """Append-only exposure log; also the recommender's training set.

    Keeps parallel user/item/label lists so retraining does not re-walk
    record objects.
    """

    def __init__(self):
        self.records: list[InteractionRecord] = []
        self._users: list[int] = []
        self._items: list[int] = []
        self._labels: list[int] = []

    def append(self, record: InteractionRecord) -> None:
        self.records.append(record)
        self._users.append(record.user_id)
        self._items.append(record.article_id)
        self._labels.append(record.clicked)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def training_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(user ids, article ids, 0/1 labels) in insertion order."""
        return (
            np.asarray(self._users, dtype=np.int64),
            np.asarray(self._items, dtype=np.int64),
            np.asarray(self._labels, dtype=np.float64),
        )


def preference_score(preference: np.ndarray, article: ArticleUtility) -> float:
    """Dot product of the preference matrix with the article's utility matrix.

    Only the article's (topic, stance) cells are nonzero, so this is the sum
    of the matching preference cells.
    """
    column = article.stance.index
    total = 0.0
    for topic in article.topics:
        total += preference[topic, column]
    return float(total)


def click_probability(score: float, n_topics: int, params: ClickModelParams) -> float:
    """logistic(steepness * (score / n_topics - midpoint)); increasing in score."""
    if n_topics < 1:
        raise ValueError(f"n_topics must be >= 1, got {n_topics}")
    z = params.steepness * (score / n_topics - params.midpoint)
    # Numerically stable in both tails.
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def simulate_impression(
    user: UserProfile,
    article: ArticleUtility,
    position: int,
    params: ClickModelParams,
    rng: np.random.Generator,
    *,
    run_id: int = 0,
    iteration: int = 0,
    epoch: int = 0,
    phase: str = PHASE_LIVE,
) -> InteractionRecord:
    """Bernoulli click draw for one shown article.

    The article is added to user.exposed whether or not it is clicked.
    """
    p = click_probability(preference_score(user.preference, article), len(article.topics), params)
    clicked = 1 if rng.random() < p else 0
    user.exposed.add(article.article_id)
    return InteractionRecord(
        run_id=run_id,
        iteration=iteration,
        epoch=epoch,
        user_id=user.user_id,
        article_id=article.article_id,
        position=position,
        clicked=clicked,
        phase=phase,
    )


def apply_drift(preference: np.ndarray, article: ArticleUtility, c: float) -> np.ndarray:
    """preference + c * utility_matrix(article), as a new matrix.

    No renormalization: repeated clicks keep adding mass, which is what lets
    preferences radicalize without bound.
    """
    if c < 0:
        raise ValueError(f"influence must be nonnegative, got {c}")
    out = preference.copy()
    out[list(article.topics), article.stance.index] += c
    return out
