#!/usr/bin/env python3
"""
Tests for the Monte Carlo harness.
"""
import numpy as np
import pytest

from pts.datagen import MIXED_GOOD_AND_BAD, gen_barrera_yohai
from pts.montecarlo import run_replication, run_simulation
from pts.schemas import Design, PtsConfig, SimSpec

CFG = PtsConfig(lts_starts=50, mcd_starts=50, max_iter=10, seed=1, threads=1)


def test_clean_design_never_converges_wrongly():
    spec = SimSpec(n=60, p=2, contamination=0.0, replications=4, seed=2)
    summary = run_simulation(spec, CFG)
    assert summary.design == Design.BARRERA_YOHAI
    assert summary.replications == 4
    assert summary.failures == 0
    assert summary.wrong_pct == 0.0
    assert len(summary.mse_per_coefficient) == 2
    assert summary.mse == pytest.approx(sum(summary.mse_per_coefficient))
    assert summary.mse < 0.5


def test_simulation_is_reproducible():
    spec = SimSpec(n=50, p=2, contamination=0.1, slope=1.5, replications=3, seed=4)
    first = run_simulation(spec, CFG)
    second = run_simulation(spec, CFG.model_copy(update={'threads': 3}))
    assert first.mean_estimate == second.mean_estimate
    assert first.wrong_pct == second.wrong_pct


def test_replication_record():
    sample = gen_barrera_yohai(SimSpec(n=50, p=2, contamination=0.1, replications=1, seed=6), 0)
    record = run_replication(sample, CFG)
    assert set(record) == {'beta', 'mse', 'wrong_convergence', 'cpu_seconds', 'flagged'}
    assert record['mse'] == pytest.approx(float(np.sum(record['beta'] ** 2)))
    assert record['flagged'] >= 5
    assert not record['wrong_convergence']


def test_mixed_design_runs():
    spec = MIXED_GOOD_AND_BAD.model_copy(update={'replications': 2, 'seed': 5})
    summary = run_simulation(spec, CFG, Design.MIXED_GOOD_BAD)
    assert summary.design == Design.MIXED_GOOD_BAD
    assert summary.spec['x_outliers'] == 6
    assert len(summary.mean_estimate) == 3
    assert summary.failures == 0
