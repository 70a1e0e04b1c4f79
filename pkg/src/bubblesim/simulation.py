"""The dynamic recommendation loop: bootstrap, per-iteration visits with
drift, periodic retraining, and multi-seed experiment orchestration.

A single run is one sequential state machine (drift makes iteration order
matter); independent runs own their state and random streams and may execute
in parallel.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .behavior import (
    PHASE_BOOTSTRAP,
    PHASE_LIVE,
    ClickModelParams,
    DriftConfig,
    InteractionLog,
    apply_drift,
    simulate_impression,
)
from .corpus import (
    ArticleUtility,
    CorpusSpec,
    Typology,
    TypologyTemplate,
    UserProfile,
    build_topic_index,
    default_templates,
    generate_articles,
    generate_users,
)
from .errors import BubblesimError, ConfigError, ExhaustionError, TrainingError
from .intervention import (
    BOOTSTRAP_TARGET_SMOOTHING,
    CalibrationParams,
    StanceDistribution,
    stance_distribution,
    calibrated_rerank,
)
from .metrics import (
    IterationMetric,
    MetricsRow,
    bootstrap_reference,
    epoch_group_aggregate,
    iteration_mps,
    umps,
)
from .recommender import MFHyper, MFModel, recommend_topk, sample_exposures, score_articles, train_mf

# Substream tags so every random decision has its own deterministic stream.
_STREAM_CORPUS = 1
_STREAM_USERS = 2
_STREAM_BOOTSTRAP = 3
_STREAM_LOOP = 4
_STREAM_TRAIN = 5

# Drift bookkeeping must reproduce c * stance * n_topics per click to 1e-9.
DRIFT_LAW_TOLERANCE = 1e-9

# Headroom factor in the up-front candidate-exhaustion check.
EXHAUSTION_SAFETY_FACTOR = 3


def substream(*keys: int) -> np.random.Generator:
    """Independent generator pinned by an integer key path."""
    return np.random.default_rng(np.random.SeedSequence(list(keys)))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; validate() enforces the cross-field rules."""

    corpus: CorpusSpec
    per_group_users: int
    iterations: int = 40000
    retrain_every: int = 200
    rec_k: int = 5
    bootstrap_per_topic: int = 10
    click: ClickModelParams = ClickModelParams()
    drift: DriftConfig = DriftConfig()
    mf: MFHyper = MFHyper()
    calibration: CalibrationParams = CalibrationParams()
    calibration_enabled: bool = False
    calibration_scope: str = "user"
    repeats: int = 10
    base_seed: int = 42
    templates: Mapping[Typology, TypologyTemplate] = field(default_factory=default_templates)
    workers: int = 1
    dump_models: bool = False

    @property
    def n_users(self) -> int:
        return 5 * self.per_group_users

    @property
    def n_epochs(self) -> int:
        return self.iterations // self.retrain_every

    def validate(self) -> None:
        if self.per_group_users < 1:
            raise ConfigError(f"per_group_users must be >= 1, got {self.per_group_users}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.retrain_every < 1:
            raise ConfigError(f"retrain_every must be >= 1, got {self.retrain_every}")
        if self.iterations % self.retrain_every != 0:
            raise ConfigError(
                f"iterations ({self.iterations}) must be divisible by retrain_every ({self.retrain_every})"
            )
        if self.rec_k < 1:
            raise ConfigError(f"rec_k must be >= 1, got {self.rec_k}")
        if self.bootstrap_per_topic < 1:
            raise ConfigError(f"bootstrap_per_topic must be >= 1, got {self.bootstrap_per_topic}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.base_seed < 0:
            raise ConfigError(f"base_seed must be >= 0, got {self.base_seed}")
        if self.calibration_scope not in ("user", "group"):
            raise ConfigError(f"calibration_scope must be 'user' or 'group', got {self.calibration_scope!r}")
        if self.calibration_enabled and self.calibration.candidate_pool < self.rec_k:
            raise ConfigError(
                f"candidate pool ({self.calibration.candidate_pool}) must be >= rec_k ({self.rec_k})"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        missing = [t.value for t in Typology if t not in self.templates]
        if missing:
            raise ConfigError(f"missing typology templates: {', '.join(missing)}")
        # Up-front exhaustion check: a user visited three times the expected
        # rate must still never run out of unexposed articles.
        if self.iterations > 0:
            expected_visits = self.iterations / self.n_users
            needed = 14 * self.bootstrap_per_topic + self.rec_k * expected_visits * EXHAUSTION_SAFETY_FACTOR
            if self.corpus.n_articles < needed:
                raise ConfigError(
                    f"corpus too small for the configured load: need >= {needed:.0f} articles "
                    f"(bootstrap {14 * self.bootstrap_per_topic} + {self.rec_k} per visit x "
                    f"{expected_visits:.1f} expected visits x safety {EXHAUSTION_SAFETY_FACTOR}), "
                    f"got {self.corpus.n_articles}"
                )


@dataclass
class World:
    """The shared starting point of every repeat: corpus plus pristine users."""

    articles: list[ArticleUtility]
    users: list[UserProfile]


def build_world(config: ExperimentConfig) -> World:
    """Generate corpus and population from base_seed (identical across repeats)."""
    articles = generate_articles(config.corpus, substream(config.base_seed, _STREAM_CORPUS))
    users = generate_users(config.per_group_users, config.templates, substream(config.base_seed, _STREAM_USERS))
    return World(articles, users)


@dataclass
class RunState:
    """Mutable state of one run."""

    run_id: int
    users: list[UserProfile]
    articles: list[ArticleUtility]
    log: InteractionLog
    model: MFModel | None = None
    targets: dict[int, StanceDistribution] = field(default_factory=dict)
    bootstrap_mps: dict[Typology, float | None] = field(default_factory=dict)
    initial_umps: dict[Typology, float] = field(default_factory=dict)
    iteration: int = 0
    iteration_metrics: list[IterationMetric] = field(default_factory=list)
    drift_law_max_err: float = 0.0
    topic_index: list[np.ndarray] = field(default_factory=list)
    articles_by_id: dict[int, ArticleUtility] = field(default_factory=dict)


def _fresh_state(config: ExperimentConfig, world: World, seed: int) -> RunState:
    users = [UserProfile(u.user_id, u.typology, u.preference.copy()) for u in world.users]
    state = RunState(run_id=seed, users=users, articles=world.articles, log=InteractionLog())
    state.topic_index = build_topic_index(world.articles)
    state.articles_by_id = {a.article_id: a for a in world.articles}
    for i, article in enumerate(world.articles):
        if article.article_id != i:
            raise ConfigError("article ids must be contiguous and sorted")
    return state


def bootstrap(state: RunState, config: ExperimentConfig, rng: np.random.Generator) -> RunState:
    """Random per-topic exposures for every user, first model fit, and the
    frozen per-user calibration targets and per-group reference lines.

    Drift never applies here; preferences after bootstrap equal the initial ones.
    """
    clicked_by_user: dict[int, list[ArticleUtility]] = {}
    for user in state.users:
        shown = sample_exposures(state.topic_index, config.bootstrap_per_topic, rng)
        clicks: list[ArticleUtility] = []
        for position, article_id in enumerate(shown, start=1):
            article = state.articles_by_id[article_id]
            record = simulate_impression(
                user, article, position, config.click, rng,
                run_id=state.run_id, iteration=0, epoch=0, phase=PHASE_BOOTSTRAP,
            )
            state.log.append(record)
            if record.clicked:
                clicks.append(article)
        clicked_by_user[user.user_id] = clicks

    if config.calibration_scope == "group":
        group_clicks: dict[Typology, list[ArticleUtility]] = {g: [] for g in Typology}
        for user in state.users:
            group_clicks[user.typology].extend(clicked_by_user[user.user_id])
        group_targets = {
            g: stance_distribution(clicks, BOOTSTRAP_TARGET_SMOOTHING)
            for g, clicks in group_clicks.items()
        }
        state.targets = {u.user_id: group_targets[u.typology] for u in state.users}
    else:
        state.targets = {
            u.user_id: stance_distribution(clicked_by_user[u.user_id], BOOTSTRAP_TARGET_SMOOTHING)
            for u in state.users
        }

    state.bootstrap_mps = bootstrap_reference(state.log.records, state.users, state.articles)
    group_umps: dict[Typology, list[float]] = {g: [] for g in Typology}
    for user in state.users:
        group_umps[user.typology].append(umps(user.preference))
    state.initial_umps = {g: float(np.mean(v)) for g, v in group_umps.items()}

    try:
        state.model = train_mf(
            state.log, config.n_users, config.corpus.n_articles, config.mf,
            substream(state.run_id, _STREAM_TRAIN, 0),
        )
    except TrainingError as exc:
        raise TrainingError(f"run {state.run_id} bootstrap training: {exc}") from exc
    return state


def _recommendation_list(state: RunState, config: ExperimentConfig, user: UserProfile) -> list[int]:
    if not config.calibration_enabled:
        return recommend_topk(state.model, user, state.articles, config.rec_k)
    available = len(state.articles) - len(user.exposed)
    pool = min(config.calibration.candidate_pool, available)
    if pool < config.rec_k:
        raise ExhaustionError(
            f"user {user.user_id}: only {available} unexposed articles remain, need {config.rec_k}"
        )
    top_ids = recommend_topk(state.model, user, state.articles, pool)
    scores = score_articles(state.model, user.user_id)
    candidates = [(state.articles_by_id[a], float(scores[a])) for a in top_ids]
    return calibrated_rerank(candidates, state.targets[user.user_id], config.calibration, config.rec_k)


def run_iteration(state: RunState, config: ExperimentConfig, rng: np.random.Generator) -> RunState:
    """One visit: uniform random user, rec_k impressions in position order,
    drift on every click, one MPS sample."""
    t = state.iteration + 1
    epoch = (t - 1) // config.retrain_every + 1
    user = state.users[int(rng.integers(len(state.users)))]
    try:
        recommended = _recommendation_list(state, config, user)
    except ExhaustionError as exc:
        raise ExhaustionError(f"run {state.run_id} iteration {t}: {exc}") from exc

    c = config.drift.influence
    stances: list[int] = []
    clicks: list[int] = []
    for position, article_id in enumerate(recommended, start=1):
        article = state.articles_by_id[article_id]
        record = simulate_impression(
            user, article, position, config.click, rng,
            run_id=state.run_id, iteration=t, epoch=epoch, phase=PHASE_LIVE,
        )
        state.log.append(record)
        stances.append(int(article.stance))
        clicks.append(record.clicked)
        if record.clicked:
            before = umps(user.preference)
            user.preference = apply_drift(user.preference, article, c)
            expected_delta = c * int(article.stance) * len(article.topics)
            err = abs(umps(user.preference) - before - expected_delta)
            if err > DRIFT_LAW_TOLERANCE:
                raise BubblesimError(
                    f"run {state.run_id} iteration {t}: drift law violated by {err:.3e} "
                    f"(article {article.article_id}, c={c})"
                )
            if err > state.drift_law_max_err:
                state.drift_law_max_err = err

    state.iteration_metrics.append(
        IterationMetric(
            iteration=t,
            epoch=epoch,
            user_id=user.user_id,
            group=user.typology,
            mps=iteration_mps(stances, clicks),
            n_clicks=sum(clicks),
        )
    )
    state.iteration = t
    return state


@dataclass
class RunResult:
    """Metrics series and final state summary of a single run."""

    run_id: int
    rows: list[MetricsRow]
    bootstrap_mps: dict[Typology, float | None]
    initial_umps: dict[Typology, float]
    users_final: list[UserProfile]
    log: InteractionLog
    drift_law_max_err: float


def run_experiment(
    config: ExperimentConfig,
    seed: int,
    world: World | None = None,
    model_sink: Callable[[int, MFModel], None] | None = None,
) -> RunResult:
    """Bootstrap then config.iterations visits, retraining (and emitting one
    metrics row per group) after every retrain_every iterations.

    Fully deterministic given (config, seed). model_sink, when given, receives
    (completed epochs, model) after every training, the bootstrap fit included.
    """
    config.validate()
    if world is None:
        world = build_world(config)
    state = _fresh_state(config, world, seed)
    bootstrap(state, config, substream(seed, _STREAM_BOOTSTRAP))
    if model_sink is not None:
        model_sink(0, state.model)

    loop_rng = substream(seed, _STREAM_LOOP)
    rows: list[MetricsRow] = []
    epoch_start = 0
    for t in range(1, config.iterations + 1):
        run_iteration(state, config, loop_rng)
        if t % config.retrain_every == 0:
            epoch = t // config.retrain_every
            rows.extend(
                epoch_group_aggregate(
                    state.iteration_metrics[epoch_start:], state.users, epoch, run_id=seed
                )
            )
            epoch_start = len(state.iteration_metrics)
            try:
                state.model = train_mf(
                    state.log, config.n_users, config.corpus.n_articles, config.mf,
                    substream(seed, _STREAM_TRAIN, epoch),
                    init_model=state.model,
                )
            except TrainingError as exc:
                raise TrainingError(f"run {seed} iteration {t} retrain: {exc}") from exc
            if model_sink is not None:
                model_sink(epoch, state.model)

    return RunResult(
        run_id=seed,
        rows=rows,
        bootstrap_mps=state.bootstrap_mps,
        initial_umps=state.initial_umps,
        users_final=state.users,
        log=state.log,
        drift_law_max_err=state.drift_law_max_err,
    )


@dataclass(frozen=True)
class AggregateRow:
    """Mean and population std over repeats for one (epoch, group, metric)."""

    epoch: int
    group: Typology
    metric: str
    mean: float
    std: float


@dataclass
class AggregateResult:
    seeds: list[int]
    rows: list[AggregateRow]


@dataclass(frozen=True)
class RunSeries:
    """The per-run values aggregation needs (a RunResult stripped of state)."""

    run_id: int
    rows: tuple[MetricsRow, ...]
    bootstrap_mps: Mapping[Typology, float | None]
    drift_law_max_err: float = 0.0


def run_series(result: RunResult) -> RunSeries:
    return RunSeries(result.run_id, tuple(result.rows), dict(result.bootstrap_mps),
                     result.drift_law_max_err)


def aggregate_series(series: Sequence[RunSeries]) -> AggregateResult:
    """Mean/std per (epoch, group, metric) over runs, ordered by seed.

    Epoch 0 carries the per-group bootstrap MPS reference; live epochs carry
    mps (over runs where the group had clicked interactions) and umps.
    """
    ordered = sorted(series, key=lambda s: s.run_id)
    epochs = sorted({row.epoch for s in ordered for row in s.rows})
    rows: list[AggregateRow] = []

    for group in Typology:
        refs = [s.bootstrap_mps.get(group) for s in ordered]
        values = [v for v in refs if v is not None]
        if values:
            rows.append(AggregateRow(0, group, "mps", float(np.mean(values)), float(np.std(values))))

    by_key: dict[tuple[int, Typology], list[MetricsRow]] = {}
    for s in ordered:
        for row in s.rows:
            by_key.setdefault((row.epoch, row.group), []).append(row)
    for epoch in epochs:
        for group in Typology:
            group_rows = by_key.get((epoch, group), [])
            mps_values = [r.mean_mps for r in group_rows if r.mean_mps is not None]
            if mps_values:
                rows.append(AggregateRow(epoch, group, "mps", float(np.mean(mps_values)), float(np.std(mps_values))))
            umps_values = [r.mean_umps for r in group_rows]
            if umps_values:
                rows.append(AggregateRow(epoch, group, "umps", float(np.mean(umps_values)), float(np.std(umps_values))))
    return AggregateResult([s.run_id for s in ordered], rows)


def _run_one(config: ExperimentConfig, seed: int, sink: Callable[[RunResult], None] | None) -> RunSeries:
    result = run_experiment(config, seed)
    if sink is not None:
        sink(result)
    return run_series(result)


def run_repeats(
    config: ExperimentConfig,
    run_sink: Callable[[RunResult], None] | None = None,
    workers: int | None = None,
) -> AggregateResult:
    """config.repeats independent runs with seeds base_seed .. base_seed+repeats-1.

    Runs execute serially or on a process pool (config.workers); results are
    aggregated in seed order either way, so the aggregate is byte-stable
    across any execution arrangement. run_sink sees each full RunResult as it
    completes (inside the worker process when parallel), e.g. to persist
    per-run outputs; it must be picklable for the parallel path.
    """
    config.validate()
    seeds = list(range(config.base_seed, config.base_seed + config.repeats))
    n_workers = config.workers if workers is None else workers
    if n_workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n_workers) as pool:
            series = list(pool.map(_run_worker, [(config, seed, run_sink) for seed in seeds]))
    else:
        series = [_run_one(config, seed, run_sink) for seed in seeds]
    return aggregate_series(series)


def _run_worker(args: tuple[ExperimentConfig, int, Callable[[RunResult], None] | None]) -> RunSeries:
    config, seed, sink = args
    return _run_one(config, seed, sink)
