"""Full paper-scale smoke: 40,000 articles, 500 users, 200 epochs, 10 repeats
per arm. Excluded from the default pytest run (deselect marker `paper`); takes
roughly 20-30 minutes on two cores:

    pytest -m paper -v -s
"""

import concurrent.futures
import dataclasses

import numpy as np
import pytest

from bubblesim.behavior import DriftConfig
from bubblesim.config import load_config
from bubblesim.corpus import Typology
from bubblesim.simulation import run_experiment, run_series

SL = Typology.SOLID_LIBERAL
CC = Typology.CORE_CONSERVATIVE
BY = Typology.BYSTANDER

pytestmark = pytest.mark.paper


def _run(args):
    config, seed = args
    return run_series(run_experiment(config, seed))


def _run_arm(config, workers=2):
    seeds = range(config.base_seed, config.base_seed + config.repeats)
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run, [(config, seed) for seed in seeds]))


def _mps_curve(series, group):
    return {row.epoch: row.mean_mps for row in series.rows if row.group == group}


def _umps_curve(series, group):
    return {row.epoch: row.mean_umps for row in series.rows if row.group == group}


def _deviation_slope(series, group, first, last):
    curve = _mps_curve(series, group)
    reference = series.bootstrap_mps[group]
    xs = [e for e in range(first, last + 1) if curve.get(e) is not None]
    return float(np.polyfit(xs, [abs(curve[e] - reference) for e in xs], 1)[0])


def _final_deviation(series, group, first, last):
    curve = _mps_curve(series, group)
    reference = series.bootstrap_mps[group]
    values = [abs(curve[e] - reference) for e in range(first, last + 1) if curve.get(e) is not None]
    return float(np.mean(values))


@pytest.fixture(scope="module")
def paper_arms():
    base = load_config(preset="paper")
    drift = dataclasses.replace(base, drift=DriftConfig(0.03))
    calibrated = dataclasses.replace(drift, calibration_enabled=True)
    return _run_arm(base), _run_arm(drift), _run_arm(calibrated)


def test_paper_scale_polarization_without_drift(paper_arms):
    runs_c0, _, _ = paper_arms
    sl = sum(_deviation_slope(r, SL, 5, 200) > 0 for r in runs_c0)
    cc = sum(_deviation_slope(r, CC, 5, 200) > 0 for r in runs_c0)
    bystander = float(np.mean([
        np.mean([abs(v) for e, v in _mps_curve(r, BY).items() if 191 <= e <= 200 and v is not None])
        for r in runs_c0
    ]))
    print(f"PAPER SCALE polarization: positive deviation slope SL {sl}/10, CC {cc}/10; bystander |MPS| {bystander:.3f}")
    assert sl >= 8 and cc >= 8 and bystander < 0.3


def test_paper_scale_preference_drift(paper_arms):
    _, runs_drift, _ = paper_arms

    def umps_slope(series, group):
        curve = _umps_curve(series, group)
        xs = sorted(curve)
        return float(np.polyfit(xs, [curve[e] for e in xs], 1)[0])

    sl = sum(umps_slope(r, SL) < 0 for r in runs_drift)
    cc = sum(umps_slope(r, CC) > 0 for r in runs_drift)
    law = max(r.drift_law_max_err for r in runs_drift)
    print(f"PAPER SCALE drift: UMPS slope SL<0 {sl}/10, CC>0 {cc}/10; max drift-law error {law:.2e}")
    assert sl >= 9 and cc >= 9 and law <= 1e-9


def test_paper_scale_calibration_comparison(paper_arms):
    _, runs_drift, runs_calibrated = paper_arms
    improved = sum(
        all(_final_deviation(c, g, 191, 200) < _final_deviation(b, g, 191, 200) for g in (SL, CC))
        for b, c in zip(runs_drift, runs_calibrated)
    )
    sl = sum(_deviation_slope(r, SL, 5, 200) > 0 for r in runs_calibrated)
    cc = sum(_deviation_slope(r, CC, 5, 200) > 0 for r in runs_calibrated)
    print(f"PAPER SCALE calibration: deviation smaller {improved}/10; calibrated slope>0 SL {sl}/10, CC {cc}/10")
    assert improved >= 8 and sl >= 8 and cc >= 8
