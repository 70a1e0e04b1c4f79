"""Matrix-factorization recommender trained by SGD on the interaction log,
plus the random per-topic exposure policy used during bootstrap."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .behavior import InteractionLog
from .corpus import N_TOPICS, ArticleUtility, UserProfile, build_topic_index
from .errors import ExhaustionError, TrainingError


@dataclass(frozen=True)
class MFHyper:
    """Training hyperparameters for the factorization model."""

    latent_dim: int = 16
    learning_rate: float = 0.05
    l2_reg: float = 0.01
    sgd_epochs: int = 10
    init_scale: float = 0.1
    warm_start: bool = False

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.l2_reg < 0:
            raise ValueError(f"l2_reg must be nonnegative, got {self.l2_reg}")
        if self.sgd_epochs < 1:
            raise ValueError(f"sgd_epochs must be >= 1, got {self.sgd_epochs}")
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")


@dataclass
class MFModel:
    """Latent user/item embedding tables."""

    user_vectors: np.ndarray
    item_vectors: np.ndarray
    hyper: MFHyper


def _sgd_passes(user_vecs, item_vecs, u_idx, i_idx, labels, orders, lr, l2):
    # One record at a time, in the pre-drawn shuffled orders; the item update
    # uses the user vector from before this record's update.
    n_dim = user_vecs.shape[1]
    for p in range(orders.shape[0]):
        for j in range(orders.shape[1]):
            r = orders[p, j]
            u = u_idx[r]
            i = i_idx[r]
            pred = 0.0
            for d in range(n_dim):
                pred += user_vecs[u, d] * item_vecs[i, d]
            err = labels[r] - pred
            for d in range(n_dim):
                xu = user_vecs[u, d]
                vi = item_vecs[i, d]
                user_vecs[u, d] = xu + lr * (err * vi - l2 * xu)
                item_vecs[i, d] = vi + lr * (err * xu - l2 * vi)


try:
    from numba import njit

    _sgd_kernel = njit(cache=True)(_sgd_passes)
except ImportError:  # pragma: no cover - numba is a declared dependency
    _sgd_kernel = _sgd_passes


def train_mf(
    log: InteractionLog,
    n_users: int,
    n_articles: int,
    hyper: MFHyper,
    rng: np.random.Generator,
    init_model: MFModel | None = None,
) -> MFModel:
    """Fit embeddings to the 0/1 click labels by squared-loss SGD with L2.

    Exposed-but-unclicked rows are the negatives. Users and items absent from
    the log keep their Gaussian(0, init_scale^2) initialization. Unless
    hyper.warm_start (and init_model is given), embeddings are drawn fresh
    from rng, so the caller's per-retrain seed fully pins the result.
    """
    if len(log) == 0:
        raise TrainingError("cannot train on an empty interaction log")
    u_idx, i_idx, labels = log.training_arrays()
    if u_idx.min() < 0 or u_idx.max() >= n_users:
        raise ValueError(f"user id out of range 0..{n_users - 1}")
    if i_idx.min() < 0 or i_idx.max() >= n_articles:
        raise ValueError(f"article id out of range 0..{n_articles - 1}")

    if hyper.warm_start and init_model is not None:
        if init_model.user_vectors.shape != (n_users, hyper.latent_dim):
            raise ValueError("warm-start model shape does not match")
        user_vecs = init_model.user_vectors.copy()
        item_vecs = init_model.item_vectors.copy()
    else:
        user_vecs = rng.normal(0.0, hyper.init_scale, (n_users, hyper.latent_dim))
        item_vecs = rng.normal(0.0, hyper.init_scale, (n_articles, hyper.latent_dim))

    orders = np.stack([rng.permutation(len(log)) for _ in range(hyper.sgd_epochs)])
    _sgd_kernel(user_vecs, item_vecs, u_idx, i_idx, labels,
                orders, hyper.learning_rate, hyper.l2_reg)

    if not (np.isfinite(user_vecs).all() and np.isfinite(item_vecs).all()):
        bad_users = int((~np.isfinite(user_vecs)).any(axis=1).sum())
        bad_items = int((~np.isfinite(item_vecs)).any(axis=1).sum())
        raise TrainingError(
            f"non-finite embeddings after training: {len(log)} records, "
            f"lr={hyper.learning_rate}, l2={hyper.l2_reg}, dim={hyper.latent_dim}, "
            f"{bad_users} user rows and {bad_items} item rows affected"
        )
    return MFModel(user_vecs, item_vecs, hyper)


def objective(log: InteractionLog, model: MFModel) -> float:
    """Full training objective: squared error over the log plus L2 on all embeddings."""
    u_idx, i_idx, labels = log.training_arrays()
    preds = np.einsum("ij,ij->i", model.user_vectors[u_idx], model.item_vectors[i_idx])
    sq = float(((labels - preds) ** 2).sum())
    l2 = model.hyper.l2_reg * float((model.user_vectors ** 2).sum() + (model.item_vectors ** 2).sum())
    return sq + l2


def predict(model: MFModel, user_id: int, article_id: int) -> float:
    """Dot product of the two embedding rows."""
    if not 0 <= user_id < model.user_vectors.shape[0]:
        raise ValueError(f"user id {user_id} out of range")
    if not 0 <= article_id < model.item_vectors.shape[0]:
        raise ValueError(f"article id {article_id} out of range")
    return float(model.user_vectors[user_id] @ model.item_vectors[article_id])


def score_articles(model: MFModel, user_id: int) -> np.ndarray:
    """Predicted score for every article id, as one vector."""
    if not 0 <= user_id < model.user_vectors.shape[0]:
        raise ValueError(f"user id {user_id} out of range")
    return model.item_vectors @ model.user_vectors[user_id]


def _select_topk(scores: np.ndarray, valid: np.ndarray, k: int) -> np.ndarray:
    """Exact top-k of scores restricted to valid, ties broken by ascending id."""
    available = np.flatnonzero(valid)
    if available.size < k:
        return available  # caller turns this into an exhaustion error
    candidate_scores = scores[available]
    if available.size == k:
        selected = available
    else:
        part = np.argpartition(-candidate_scores, k - 1)[:k]
        kth = candidate_scores[part].min()
        above = available[candidate_scores > kth]
        need = k - above.size
        ties = available[candidate_scores == kth][:need]
        selected = np.concatenate([above, ties])
    order = np.lexsort((selected, -scores[selected]))
    return selected[order]


def recommend_topk(
    model: MFModel,
    user: UserProfile,
    all_articles: Sequence[ArticleUtility],
    k: int,
) -> list[int]:
    """The k highest-scoring articles the user has not been exposed to,
    descending score, ties by ascending article id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = len(all_articles)
    scores = score_articles(model, user.user_id)[:n]
    valid = np.ones(n, dtype=bool)
    if user.exposed:
        valid[list(user.exposed)] = False
    selected = _select_topk(scores, valid, k)
    if selected.size < k:
        raise ExhaustionError(
            f"user {user.user_id}: only {selected.size} unexposed articles remain, need {k}"
        )
    return [int(a) for a in selected]


def random_exposures_per_topic(
    articles: Sequence[ArticleUtility],
    per_topic: int,
    rng: np.random.Generator,
) -> list[int]:
    """per_topic articles sampled uniformly without replacement from each topic.

    Selections are concatenated in topic order; an article picked for two of
    its topics appears once (so the total can be below 14 * per_topic).
    """
    return sample_exposures(build_topic_index(articles), per_topic, rng)


def sample_exposures(
    topic_index: Sequence[np.ndarray],
    per_topic: int,
    rng: np.random.Generator,
) -> list[int]:
    """Same as random_exposures_per_topic over a prebuilt topic index."""
    if per_topic < 1:
        raise ValueError(f"per_topic must be >= 1, got {per_topic}")
    chosen: list[int] = []
    for topic in range(N_TOPICS):
        pool = topic_index[topic]
        if pool.size < per_topic:
            raise ExhaustionError(
                f"topic {topic} has only {pool.size} articles, need {per_topic}"
            )
        picks = rng.choice(pool, size=per_topic, replace=False)
        chosen.extend(int(a) for a in picks)
    return list(dict.fromkeys(chosen))
