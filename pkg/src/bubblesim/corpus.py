"""Synthetic article corpus and typology-based user population.

Articles carry a topic set and one of five political stances; users carry a
14x5 (topic x stance) preference matrix drawn around a per-typology stance
weight vector. Everything is generated from an explicit numpy Generator so
that (spec, seed) pins the corpus and population exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError

N_TOPICS = 14
N_STANCES = 5

TOPIC_NAMES = (
    "abortion",
    "environment",
    "guns",
    "health care",
    "immigration",
    "LGBTQIA",
    "taxes",
    "technology",
    "trade",
    "Trump impeachment",
    "US military",
    "welfare",
    "US 2020 election",
    "racism",
)


class Stance(enum.IntEnum):
    """Political stance on the liberal (-2) .. conservative (+2) axis."""

    EXTREME_LIBERAL = -2
    LIBERAL = -1
    NEUTRAL = 0
    CONSERVATIVE = 1
    EXTREME_CONSERVATIVE = 2

    @property
    def index(self) -> int:
        """Column index 0..4 used in matrix layouts."""
        return int(self) + 2

    @classmethod
    def from_index(cls, index: int) -> "Stance":
        return cls(index - 2)


class Typology(enum.Enum):
    """The five user groups, ordered liberal to conservative."""

    SOLID_LIBERAL = "solid_liberal"
    OPPORTUNITY_DEMOCRAT = "opportunity_democrat"
    BYSTANDER = "bystander"
    MARKET_SKEPTIC_REPUBLICAN = "market_skeptic_republican"
    CORE_CONSERVATIVE = "core_conservative"


@dataclass(frozen=True)
class ArticleUtility:
    """An article's topic set and stance.

    Materializes as a 14x5 binary matrix with ones at (topic, stance column)
    for every covered topic; see :func:`utility_matrix`.
    """

    article_id: int
    topics: tuple[int, ...]
    stance: Stance

    def __post_init__(self):
        topics = tuple(sorted(set(self.topics)))
        if not topics:
            raise ValueError(f"article {self.article_id}: topic set is empty")
        if topics[0] < 0 or topics[-1] >= N_TOPICS:
            raise ValueError(f"article {self.article_id}: topic id out of range 0..13")
        object.__setattr__(self, "topics", topics)
        object.__setattr__(self, "stance", Stance(self.stance))


def utility_matrix(article: ArticleUtility) -> np.ndarray:
    """14x5 binary matrix: one at (t, stance column) for each covered topic t."""
    m = np.zeros((N_TOPICS, N_STANCES))
    m[list(article.topics), article.stance.index] = 1.0
    return m


@dataclass(frozen=True)
class TypologyTemplate:
    """Stance weight vector applied to every topic, plus Dirichlet concentration.

    Per-user preference rows are Dirichlet(concentration * base_weights) draws,
    so larger concentration means users cluster tighter around the template.
    """

    typology: Typology
    base_weights: tuple[float, ...]
    concentration: float = 50.0

    def __post_init__(self):
        weights = tuple(float(w) for w in self.base_weights)
        if len(weights) != N_STANCES:
            raise ConfigError(f"{self.typology.value}: expected {N_STANCES} weights, got {len(weights)}")
        if any(w < 0 for w in weights):
            raise ConfigError(f"{self.typology.value}: negative stance weight")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ConfigError(f"{self.typology.value}: weights sum to {sum(weights)!r}, expected 1")
        if not self.concentration > 0:
            raise ConfigError(f"{self.typology.value}: concentration must be positive")
        object.__setattr__(self, "base_weights", weights)
        object.__setattr__(self, "concentration", float(self.concentration))


_DEFAULT_WEIGHTS = {
    Typology.SOLID_LIBERAL: (0.45, 0.30, 0.15, 0.07, 0.03),
    Typology.OPPORTUNITY_DEMOCRAT: (0.25, 0.35, 0.25, 0.10, 0.05),
    Typology.BYSTANDER: (0.10, 0.20, 0.40, 0.20, 0.10),
    Typology.MARKET_SKEPTIC_REPUBLICAN: (0.05, 0.10, 0.25, 0.35, 0.25),
    Typology.CORE_CONSERVATIVE: (0.03, 0.07, 0.15, 0.30, 0.45),
}


def default_templates() -> dict[Typology, TypologyTemplate]:
    """Shipped stance-weight templates, concentration 50 for every group."""
    return {t: TypologyTemplate(t, w) for t, w in _DEFAULT_WEIGHTS.items()}


@dataclass
class UserProfile:
    """A user's group, 14x5 preference matrix, and exposure history.

    Preference rows sum to 1 at creation; drift only ever adds nonnegative
    mass, so entries stay >= 0. ``exposed`` grows monotonically over a run.
    """

    user_id: int
    typology: Typology
    preference: np.ndarray
    exposed: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class CorpusSpec:
    """Size and topic-multiplicity knobs for a generated corpus."""

    n_articles: int
    multi_topic_prob: float = 0.2
    max_topics_per_article: int = 2

    def __post_init__(self):
        if self.n_articles <= 0 or self.n_articles % N_STANCES != 0:
            raise ConfigError(f"n_articles must be positive and divisible by {N_STANCES}, got {self.n_articles}")
        if not 0.0 <= self.multi_topic_prob <= 1.0:
            raise ConfigError(f"multi_topic_prob must be in [0, 1], got {self.multi_topic_prob}")
        if self.max_topics_per_article < 1:
            raise ConfigError(f"max_topics_per_article must be >= 1, got {self.max_topics_per_article}")
        if self.max_topics_per_article > N_TOPICS:
            raise ConfigError(f"max_topics_per_article must be <= {N_TOPICS}, got {self.max_topics_per_article}")


def generate_articles(spec: CorpusSpec, rng: np.random.Generator) -> list[ArticleUtility]:
    """Generate spec.n_articles articles with exactly n_articles/5 per stance.

    Stances round-robin over article ids; topic count per article is
    1 + Binomial(max_topics_per_article - 1, multi_topic_prob), topics drawn
    uniformly without replacement.
    """
    articles = []
    for article_id in range(spec.n_articles):
        stance = Stance(article_id % N_STANCES - 2)
        extra = int(rng.binomial(spec.max_topics_per_article - 1, spec.multi_topic_prob))
        count = min(1 + extra, N_TOPICS)
        topics = rng.choice(N_TOPICS, size=count, replace=False)
        articles.append(ArticleUtility(article_id, tuple(int(t) for t in topics), stance))
    return articles


def _dirichlet_rows(alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # Zero-weight stances stay exactly zero (the Dirichlet limit on that face).
    positive = alpha > 0
    if positive.all():
        return rng.dirichlet(alpha, size=N_TOPICS)
    rows = np.zeros((N_TOPICS, N_STANCES))
    if positive.sum() == 1:
        rows[:, positive] = 1.0
    else:
        rows[:, positive] = rng.dirichlet(alpha[positive], size=N_TOPICS)
    return rows


def generate_users(
    per_group: int,
    templates: Mapping[Typology, TypologyTemplate],
    rng: np.random.Generator,
) -> list[UserProfile]:
    """Generate per_group users for each of the five typologies.

    Every preference row is an independent Dirichlet(concentration * weights)
    draw, so rows sum to 1 at creation.
    """
    if per_group <= 0:
        raise ConfigError(f"per_group must be positive, got {per_group}")
    missing = [t.value for t in Typology if t not in templates]
    if missing:
        raise ConfigError(f"missing typology templates: {', '.join(missing)}")
    users = []
    user_id = 0
    for typology in Typology:
        template = templates[typology]
        alpha = template.concentration * np.asarray(template.base_weights)
        for _ in range(per_group):
            users.append(UserProfile(user_id, typology, _dirichlet_rows(alpha, rng)))
            user_id += 1
    return users


def build_topic_index(articles: Iterable[ArticleUtility]) -> list[np.ndarray]:
    """Article ids per topic, in ascending id order."""
    buckets: list[list[int]] = [[] for _ in range(N_TOPICS)]
    for article in articles:
        for topic in article.topics:
            buckets[topic].append(article.article_id)
    return [np.asarray(b, dtype=np.int64) for b in buckets]
