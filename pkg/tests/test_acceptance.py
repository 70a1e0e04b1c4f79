"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 3-5 execute the shipped desk preset (2,000 articles, 50 users,
40 epochs) over 10 seeds for each arm: influence 0, influence 0.03, and
influence 0.03 with calibrated re-ranking. Run with `pytest tests/test_acceptance.py -v -s`
to see every line.
"""

import dataclasses
import itertools
import math

import numpy as np
import pytest

from bubblesim import csvio
from bubblesim.behavior import DriftConfig, InteractionLog, InteractionRecord, apply_drift
from bubblesim.cli import main
from bubblesim.config import load_config
from bubblesim.corpus import ArticleUtility, Stance, Typology
from bubblesim.intervention import (
    CalibrationParams,
    StanceDistribution,
    calibrated_rerank,
    calibration_divergence,
    normalize_relevances,
    stance_distribution,
)
from bubblesim.metrics import iteration_mps, umps
from bubblesim.recommender import MFHyper, MFModel, score_articles, train_mf
from bubblesim.simulation import build_world, run_experiment

SL = Typology.SOLID_LIBERAL
CC = Typology.CORE_CONSERVATIVE
BY = Typology.BYSTANDER


def report(number: int, name: str, ok: bool, detail: str = "") -> None:
    import conftest

    status = "PASS" if ok else "FAIL"
    suffix = f" -- {detail}" if detail else ""
    line = f"ACCEPTANCE {number} ({name}): {status}{suffix}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)


# -- shared desk-scale runs ----------------------------------------------------


@pytest.fixture(scope="module")
def desk_configs():
    base = load_config(preset="desk")
    drift = dataclasses.replace(base, drift=DriftConfig(0.03))
    calibrated = dataclasses.replace(drift, calibration_enabled=True)
    return base, drift, calibrated


@pytest.fixture(scope="module")
def desk_world(desk_configs):
    return build_world(desk_configs[0])


def _run_arm(config, world):
    seeds = range(config.base_seed, config.base_seed + config.repeats)
    return [run_experiment(config, seed, world) for seed in seeds]


@pytest.fixture(scope="module")
def runs_c0(desk_configs, desk_world):
    return _run_arm(desk_configs[0], desk_world)


@pytest.fixture(scope="module")
def runs_drift(desk_configs, desk_world):
    return _run_arm(desk_configs[1], desk_world)


@pytest.fixture(scope="module")
def runs_calibrated(desk_configs, desk_world):
    return _run_arm(desk_configs[2], desk_world)


def mps_curve(result, group):
    return {row.epoch: row.mean_mps for row in result.rows if row.group == group}


def umps_curve(result, group):
    return {row.epoch: row.mean_umps for row in result.rows if row.group == group}


def deviation_slope(result, group, first_epoch, last_epoch):
    """OLS slope of |epoch MPS - bootstrap MPS| over the epoch window."""
    curve = mps_curve(result, group)
    reference = result.bootstrap_mps[group]
    xs = [e for e in range(first_epoch, last_epoch + 1) if curve.get(e) is not None]
    ys = [abs(curve[e] - reference) for e in xs]
    return float(np.polyfit(xs, ys, 1)[0])


def final_window_deviation(result, group, first_epoch, last_epoch):
    curve = mps_curve(result, group)
    reference = result.bootstrap_mps[group]
    values = [abs(curve[e] - reference) for e in range(first_epoch, last_epoch + 1)
              if curve.get(e) is not None]
    return float(np.mean(values))


# -- criterion 1: exact arithmetic --------------------------------------------


def test_criterion_1_exact_arithmetic():
    checks = []

    checks.append(iteration_mps([-2, -1, 0, 1, 2], [1, 0, 0, 0, 1]) == 0.0)
    checks.append(abs(iteration_mps([-2, -2, -1, 0, 1], [1, 1, 0, 0, 0]) - (-2.0)) <= 1e-9)
    checks.append(iteration_mps([-2, -1, 0, 1, 2], [0, 0, 0, 0, 0]) is None)

    extreme = np.zeros((14, 5))
    extreme[:, 4] = 1.0
    checks.append(abs(umps(extreme) - 28.0) <= 1e-9)
    checks.append(abs(umps(np.full((14, 5), 0.2))) <= 1e-9)

    pref = np.zeros((14, 5))
    pref[2, 4] = 0.15
    drifted = apply_drift(pref, ArticleUtility(0, (2,), Stance.EXTREME_CONSERVATIVE), 0.03)
    checks.append(abs(drifted[2, 4] - 0.18) <= 1e-9)
    checks.append(np.array_equal(apply_drift(pref, ArticleUtility(0, (2,), Stance(2)), 0.0), pref))
    rng = np.random.default_rng(0)
    for _ in range(20):
        matrix = rng.random((14, 5))
        topics = tuple(int(t) for t in rng.choice(14, size=2, replace=False))
        stance = Stance(int(rng.integers(-2, 3)))
        delta = umps(apply_drift(matrix, ArticleUtility(1, topics, stance), 0.03)) - umps(matrix)
        checks.append(abs(delta - 0.03 * int(stance) * 2) <= 1e-9)

    same = StanceDistribution((0.5, 0.3, 0.1, 0.05, 0.05))
    checks.append(calibration_divergence(same, same, 0.01) == 0.0)
    disjoint = calibration_divergence(
        StanceDistribution((1.0, 0.0, 0.0, 0.0, 0.0)),
        StanceDistribution((0.0, 0.0, 0.0, 0.0, 1.0)),
        0.01,
    )
    checks.append(abs(disjoint - math.log(100.0)) <= 1e-9)

    liberal = [ArticleUtility(i, (0,), Stance.EXTREME_LIBERAL) for i in range(3)]
    neutral = [ArticleUtility(9, (0,), Stance.NEUTRAL)]
    checks.append(stance_distribution(liberal + neutral, 0.0).probs == (0.75, 0.0, 0.25, 0.0, 0.0))
    checks.append(stance_distribution([], 0.5).probs == (0.2,) * 5)

    ok = all(checks)
    report(1, "exact-arithmetic unit suite", ok, f"{sum(checks)}/{len(checks)} checks")
    assert ok


# -- criterion 2: frozen preferences at influence 0 -----------------------------


def test_criterion_2_frozen_preferences(desk_world, runs_c0):
    initial = csvio.users_csv_bytes(desk_world.users)
    mismatches = [r.run_id for r in runs_c0 if csvio.users_csv_bytes(r.users_final) != initial]
    ok = not mismatches
    report(2, "frozen preferences, c=0", ok,
           "all 10 runs byte-identical" if ok else f"mismatch in runs {mismatches}")
    assert ok


# -- criterion 3: reading extremity grows at influence 0 --------------------------


def test_criterion_3_polarization_without_drift(runs_c0):
    sl_positive = sum(deviation_slope(r, SL, 5, 40) > 0 for r in runs_c0)
    cc_positive = sum(deviation_slope(r, CC, 5, 40) > 0 for r in runs_c0)
    bystander = float(np.mean([
        np.mean([abs(v) for e, v in mps_curve(r, BY).items() if 31 <= e <= 40 and v is not None])
        for r in runs_c0
    ]))
    ok = sl_positive >= 8 and cc_positive >= 8 and bystander < 0.3
    report(3, "reading-extremity growth, c=0", ok,
           f"positive deviation slope: solid_liberal {sl_positive}/10, "
           f"core_conservative {cc_positive}/10 (need >=8); bystander |MPS| {bystander:.3f} (need <0.3)")
    assert ok, (
        "desk-scale |MPS - reference| slope over epochs 5-40 is not positive: "
        f"solid_liberal {sl_positive}/10, core_conservative {cc_positive}/10. "
        "The deviation rises through roughly epoch 15 and then reverts as the 10-user groups "
        "exhaust the extreme-stance articles their groupmates have clicked (2,000-article corpus, "
        "~534 exposures per user). The same code at paper scale (40,000 articles, 500 users) "
        "keeps the slope positive; see notes in the decisions ledger."
    )


# -- criterion 4: inherent preferences radicalize at influence 0.03 ---------------


def test_criterion_4_preference_drift(runs_drift):
    def umps_slope(result, group):
        curve = umps_curve(result, group)
        xs = sorted(curve)
        return float(np.polyfit(xs, [curve[e] for e in xs], 1)[0])

    sl_negative = sum(umps_slope(r, SL) < 0 for r in runs_drift)
    cc_positive = sum(umps_slope(r, CC) > 0 for r in runs_drift)
    worst_law_error = max(r.drift_law_max_err for r in runs_drift)
    ok = sl_negative >= 9 and cc_positive >= 9 and worst_law_error <= 1e-9
    report(4, "preference drift, c=0.03", ok,
           f"UMPS slope: solid_liberal<0 {sl_negative}/10, core_conservative>0 {cc_positive}/10 "
           f"(need >=9); max per-click law error {worst_law_error:.2e} (need <=1e-9)")
    assert ok


# -- criterion 5: calibrated re-ranking slows the deviation -----------------------


def test_criterion_5_calibration_comparison(runs_drift, runs_calibrated):
    improved = 0
    for baseline, calibrated in zip(runs_drift, runs_calibrated):
        assert baseline.run_id == calibrated.run_id
        better = all(
            final_window_deviation(calibrated, g, 31, 40) < final_window_deviation(baseline, g, 31, 40)
            for g in (SL, CC)
        )
        improved += better
    sl_slope_positive = sum(deviation_slope(r, SL, 5, 40) > 0 for r in runs_calibrated)
    cc_slope_positive = sum(deviation_slope(r, CC, 5, 40) > 0 for r in runs_calibrated)
    ok = improved >= 8 and sl_slope_positive >= 8 and cc_slope_positive >= 8
    report(5, "calibrated re-ranking, c=0.03", ok,
           f"deviation strictly smaller in both extreme groups: {improved}/10 seeds (need >=8); "
           f"calibrated slope still positive: solid_liberal {sl_slope_positive}/10, "
           f"core_conservative {cc_slope_positive}/10 (need >=8)")
    assert ok, (
        "desk-scale calibration comparison fails: the baseline's own late-run deviation already "
        f"collapses (article-pool depletion), so calibration beat it in only {improved}/10 seeds. "
        "At paper scale the baseline stays extreme and calibration reduces the deviation; "
        "see notes in the decisions ledger."
    )


# -- criterion 6: greedy re-rank oracle ------------------------------------------


def _rerank_instance(seed):
    rng = np.random.default_rng(seed)
    candidates = [
        (ArticleUtility(i, (int(rng.integers(14)),), Stance(int(rng.integers(-2, 3)))),
         float(rng.random()))
        for i in range(10)
    ]
    target = StanceDistribution(tuple(rng.dirichlet(np.ones(5))))
    return candidates, target


def _set_objective(candidates, indices, target, lam, alpha):
    rels = normalize_relevances([rel for _, rel in candidates])
    counts = [0] * 5
    for i in indices:
        counts[candidates[i][0].stance.index] += 1
    dist = StanceDistribution(tuple(c / len(indices) for c in counts))
    return (1 - lam) * sum(rels[i] for i in indices) - lam * calibration_divergence(target, dist, alpha)


def test_criterion_6_greedy_rerank_oracle():
    params = CalibrationParams(lam=0.9, alpha=0.01)
    near_optimal = 0
    top5_matches = 0
    for seed in range(100):
        candidates, target = _rerank_instance(seed)
        index_of = {a.article_id: i for i, (a, _) in enumerate(candidates)}
        greedy = [index_of[i] for i in calibrated_rerank(candidates, target, params, 5)]
        greedy_value = _set_objective(candidates, greedy, target, params.lam, params.alpha)
        optimum = max(
            _set_objective(candidates, subset, target, params.lam, params.alpha)
            for subset in itertools.combinations(range(10), 5)
        )
        if greedy_value >= optimum - 0.05 * abs(optimum) - 1e-12:
            near_optimal += 1
        plain = set(calibrated_rerank(candidates, target, CalibrationParams(lam=0.0), 5))
        expected = {a.article_id for a, _ in sorted(candidates, key=lambda c: (-c[1], c[0].article_id))[:5]}
        top5_matches += plain == expected
    ok = near_optimal == 100 and top5_matches == 100
    report(6, "greedy re-rank vs exhaustive oracle", ok,
           f"within 5% of the 252-subset optimum in {near_optimal}/100 instances; "
           f"lambda=0 equals relevance top-5 in {top5_matches}/100")
    assert ok


# -- criterion 7: MF sanity -------------------------------------------------------


def _log_from(rows):
    log = InteractionLog()
    for n, (u, i, y) in enumerate(rows):
        log.append(InteractionRecord(0, n, 0, user_id=u, article_id=i, position=1, clicked=y, phase="live"))
    return log


def _full_objective(log, user_vecs, item_vecs, l2):
    total = 0.0
    for record in log:
        pred = float(np.dot(user_vecs[record.user_id], item_vecs[record.article_id]))
        total += (record.clicked - pred) ** 2
    return total + l2 * (float((user_vecs ** 2).sum()) + float((item_vecs ** 2).sum()))


def test_criterion_7_mf_sanity():
    rng = np.random.default_rng(20)
    rows = [(int(rng.integers(4)), int(rng.integers(6)), int(rng.integers(2))) for _ in range(20)]
    log = _log_from(rows)
    hyper = MFHyper(latent_dim=8, warm_start=True)
    start = MFModel(rng.normal(0, 0.1, (4, 8)), rng.normal(0, 0.1, (6, 8)), hyper)
    before = _full_objective(log, start.user_vectors, start.item_vectors, hyper.l2_reg)
    trained = train_mf(log, 4, 6, hyper, np.random.default_rng(1), init_model=start)
    after = _full_objective(log, trained.user_vectors, trained.item_vectors, hyper.l2_reg)
    decreased = after < before

    sep_rng = np.random.default_rng(30)
    sep_rows = []
    for user_id in range(20):
        own = range(0, 20) if user_id < 10 else range(20, 40)
        for item in sep_rng.choice(40, size=30, replace=False):
            sep_rows.append((user_id, int(item), int(item in own)))
    model = train_mf(_log_from(sep_rows), 20, 40, MFHyper(), np.random.default_rng(2))
    aucs = []
    for user_id in range(20):
        own = range(0, 20) if user_id < 10 else range(20, 40)
        other = range(20, 40) if user_id < 10 else range(0, 20)
        scores = score_articles(model, user_id)
        wins = sum(1.0 if scores[a] > scores[b] else 0.5 if scores[a] == scores[b] else 0.0
                   for a in own for b in other)
        aucs.append(wins / 400)
    auc = float(np.mean(aucs))

    ok = decreased and auc > 0.9
    report(7, "MF training sanity", ok,
           f"objective {before:.3f} -> {after:.3f} (must decrease); group AUC {auc:.3f} (need >0.9)")
    assert ok


# -- criterion 8: determinism ------------------------------------------------------

_DETERMINISM_INI = """\
[corpus]
n_articles = 600

[users]
per_group = 2

[simulation]
iterations = 100
retrain_every = 50
repeats = 3
base_seed = 21

[mf]
latent_dim = 8
sgd_epochs = 3
"""


def test_criterion_8_determinism(tmp_path):
    config_path = tmp_path / "exp.ini"
    config_path.write_text(_DETERMINISM_INI)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(config_path), "--out", str(out_a)]) == 0
    assert main(["run", "--config", str(config_path), "--out", str(out_b)]) == 0
    files_identical = all(
        (out_a / "runs" / str(seed) / name).read_bytes() == (out_b / "runs" / str(seed) / name).read_bytes()
        for seed in (21, 22, 23)
        for name in (csvio.INTERACTIONS_FILE, csvio.METRICS_FILE)
    )

    parallel_path = tmp_path / "parallel.ini"
    parallel_path.write_text(_DETERMINISM_INI.replace("base_seed = 21", "base_seed = 21\nworkers = 2"))
    out_p = tmp_path / "p"
    assert main(["run", "--config", str(parallel_path), "--out", str(out_p)]) == 0
    aggregates_identical = (
        (out_a / csvio.AGGREGATE_FILE).read_bytes() == (out_p / csvio.AGGREGATE_FILE).read_bytes()
    )

    ok = files_identical and aggregates_identical
    report(8, "byte-level determinism", ok,
           f"rerun files identical: {files_identical}; parallel vs serial aggregate identical: {aggregates_identical}")
    assert ok
