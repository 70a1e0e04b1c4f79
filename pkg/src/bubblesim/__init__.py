"""Seed-deterministic simulator of the feedback loop between a news
recommender and a drifting user population."""

from .behavior import (
    ClickModelParams,
    DriftConfig,
    InteractionLog,
    InteractionRecord,
    apply_drift,
    click_probability,
    preference_score,
    simulate_impression,
)
from .corpus import (
    ArticleUtility,
    CorpusSpec,
    Stance,
    Typology,
    TypologyTemplate,
    UserProfile,
    default_templates,
    generate_articles,
    generate_users,
    utility_matrix,
)
from .errors import BubblesimError, ConfigError, ExhaustionError, TrainingError
from .intervention import (
    CalibrationParams,
    StanceDistribution,
    calibrated_rerank,
    calibration_divergence,
    stance_distribution,
)
from .metrics import (
    IterationMetric,
    MetricsRow,
    bootstrap_reference,
    epoch_group_aggregate,
    iteration_mps,
    umps,
)
from .recommender import (
    MFHyper,
    MFModel,
    predict,
    random_exposures_per_topic,
    recommend_topk,
    train_mf,
)
from .simulation import (
    AggregateResult,
    AggregateRow,
    ExperimentConfig,
    RunResult,
    RunState,
    World,
    bootstrap,
    build_world,
    run_experiment,
    run_iteration,
    run_repeats,
)

__version__ = "0.1.0"
