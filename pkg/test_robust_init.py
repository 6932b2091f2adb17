#!/usr/bin/env python3
"""
Tests for the robust starting ingredients: LTS, robust scale, MCD and robust leverages.
"""
import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import pts.robust_init as robust_init
from pts.errors import BudgetExceeded, DegenerateData, SingularScatter
from pts.linalg_core import Dataset, hat_values, ols_fit
from pts.robust_init import (LtsResult, c_step, consistency_factor, default_coverage, lts_exact, lts_fit,
                             mcd_c_step, mcd_fit, robust_leverages, robust_scale)
from pts.worker_pool import IterationPool


def _lts_from_residuals(residuals, p=1):
    """LtsResult with beta = 0 so the residuals equal y."""
    n = len(residuals)
    k = default_coverage(n, p)
    order = np.argsort(residuals ** 2, kind='stable')
    subset = np.sort(order[:k])
    return LtsResult(beta_lts=np.zeros(p), subset=subset, coverage=k,
                     objective=float(np.sum(residuals[subset] ** 2)), residuals=residuals.copy())


def _small_instance(seed, n=12):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    y = 0.5 + x + rng.normal(size=n)
    y[:3] += rng.uniform(5, 10, 3)
    return Dataset.from_arrays(x, y)


# ---------------------------------------------------------------------------
# LTS
# ---------------------------------------------------------------------------

def test_c_steps_never_increase_objective():
    data = _small_instance(1, n=40)
    k = default_coverage(data.n, data.p)
    subset = np.arange(0, 40, 3)
    previous = np.inf
    for _ in range(8):
        subset, objective, _ = c_step(data, subset, k)
        assert objective <= previous * (1 + 1e-12)
        previous = objective


def test_lts_full_coverage_is_ols():
    data = _small_instance(2)
    result = lts_fit(data, coverage=data.n, n_starts=5, seed=0)
    assert_allclose(result.beta_lts, ols_fit(data, np.arange(data.n)).beta)
    assert result.subset.tolist() == list(range(data.n))


def test_lts_recovers_exact_hyperplane():
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 10, 25)
    y = 1.0 + 2.0 * x
    y[20:] = rng.uniform(50, 80, 5)
    data = Dataset.from_arrays(x, y)

    result = lts_fit(data, n_starts=50, seed=1, pool=IterationPool(1))
    assert result.objective < 1e-18
    assert_allclose(result.beta_lts, [1.0, 2.0], atol=1e-8)


def test_lts_subset_holds_k_smallest_residuals():
    data = _small_instance(4, n=30)
    result = lts_fit(data, n_starts=100, seed=2, pool=IterationPool(1))
    r2 = result.residuals ** 2
    inside = np.zeros(data.n, dtype=bool)
    inside[result.subset] = True
    assert len(result.subset) == result.coverage
    assert r2[inside].max() <= r2[~inside].min() + 1e-12


def test_lts_exact_trivial_zero_fit():
    X = np.ones((8, 1))
    y = np.array([0, 0, 0, 0, 0, 100, 100, 100], dtype=float)
    result = lts_exact(Dataset(X, y), coverage=5)
    assert result.beta_lts[0] == pytest.approx(0.0, abs=1e-12)
    assert result.objective == pytest.approx(0.0, abs=1e-12)
    assert result.subset.tolist() == [0, 1, 2, 3, 4]


def test_lts_fit_reaches_enumeration_optimum():
    """500 starts find the global LTS optimum on n=12 instances"""
    hits = 0
    for seed in range(10):
        data = _small_instance(100 + seed)
        exact = lts_exact(data, coverage=7)
        approx = lts_fit(data, coverage=7, n_starts=500, seed=seed, pool=IterationPool(1))
        assert approx.objective >= exact.objective - 1e-9 * max(1.0, exact.objective)
        hits += abs(approx.objective - exact.objective) <= 1e-9 * max(1.0, exact.objective)
    assert hits >= 9


def test_lts_exact_budget():
    data = _small_instance(5, n=40)
    with pytest.raises(BudgetExceeded) as excinfo:
        lts_exact(data, budget=1000)
    assert excinfo.value.budget == 1000


def test_concentration_cap_is_logged(caplog, contaminated_line):
    k = default_coverage(contaminated_line.n, contaminated_line.p)
    with caplog.at_level(logging.WARNING, logger="pts.robust_init"):
        # rows 0..3 leave the subset after one step, so zero steps cannot reach a fixed point
        robust_init._concentrate(contaminated_line, np.arange(k), k, 0, warn_on_cap=True)
    assert "cap of 0 C-steps" in caplog.text

    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="pts.robust_init"):
        result = lts_fit(contaminated_line, n_starts=50, seed=1, pool=IterationPool(1))
    assert "cap" not in caplog.text
    assert_array_equal(c_step(contaminated_line, result.subset, k)[0], result.subset)


def test_mcd_concentration_cap_is_logged(caplog):
    rng = np.random.default_rng(4)
    Z = rng.normal(size=(30, 1))
    Z[:5] += 50.0
    with caplog.at_level(logging.WARNING, logger="pts.robust_init"):
        robust_init._mcd_concentrate(Z, np.arange(18), 18, 0, warn_on_cap=True)
    assert "MCD concentration stopped at the cap" in caplog.text


def test_lts_is_deterministic_across_threads():
    data = _small_instance(6, n=50)
    serial = lts_fit(data, n_starts=60, seed=9, pool=IterationPool(1))
    again = lts_fit(data, n_starts=60, seed=9, pool=IterationPool(1))
    threaded = lts_fit(data, n_starts=60, seed=9, pool=IterationPool(4))
    assert_array_equal(serial.subset, again.subset)
    assert_array_equal(serial.beta_lts, again.beta_lts)
    assert_array_equal(serial.subset, threaded.subset)
    assert_array_equal(serial.beta_lts, threaded.beta_lts)


def test_lts_rank_deficient_design():
    data = Dataset.from_arrays(np.zeros(10), np.arange(10.0))
    with pytest.raises(DegenerateData):
        lts_fit(data, n_starts=5)


# ---------------------------------------------------------------------------
# Robust scale
# ---------------------------------------------------------------------------

def test_consistency_factor_limits():
    assert consistency_factor(10, 10) == (1.0, 0.0)
    c, alpha = consistency_factor(51, 100)
    assert c > 1.0
    assert alpha > 0.0


def test_scale_of_exact_fit_is_zero():
    residuals = np.zeros(20)
    data = Dataset(np.ones((20, 1)), np.zeros(20))
    scale = robust_scale(data, _lts_from_residuals(residuals))
    assert scale.s_hat == 0.0 and scale.sigma_hat == 0.0
    assert_array_equal(scale.weights, np.ones(20))


def test_scale_is_consistent_at_the_normal():
    inside = 0
    for seed in range(100):
        y = np.random.default_rng(seed).standard_normal(100)
        data = Dataset(np.ones((100, 1)), y)
        scale = robust_scale(data, _lts_from_residuals(y))
        inside += 0.8 <= scale.sigma_hat <= 1.2
    assert inside >= 95


def test_scale_is_equivariant():
    y = np.random.default_rng(7).standard_normal(60)
    y[:5] += 20
    base = robust_scale(Dataset(np.ones((60, 1)), y), _lts_from_residuals(y))
    gamma = 3.7
    scaled = robust_scale(Dataset(np.ones((60, 1)), gamma * y), _lts_from_residuals(gamma * y))
    assert scaled.s_hat == pytest.approx(gamma * base.s_hat, rel=1e-12)
    assert scaled.sigma_hat == pytest.approx(gamma * base.sigma_hat, rel=1e-12)
    assert_array_equal(scaled.weights, base.weights)
    # the five shifted rows are downweighted
    assert base.weights[:5].sum() == 0


# ---------------------------------------------------------------------------
# MCD and robust leverages
# ---------------------------------------------------------------------------

def test_mcd_full_coverage_uses_sample_covariance():
    rng = np.random.default_rng(8)
    data = Dataset.from_arrays(rng.normal(size=(30, 2)), rng.normal(size=30))
    result = mcd_fit(data, coverage=30, n_starts=10)
    assert result.subset.tolist() == list(range(30))
    assert result.dropped_constant_columns == [0]
    Z = data.X[:, 1:]
    assert_allclose(result.scatter, np.cov(Z, rowvar=False, bias=True), rtol=1e-10)
    assert_allclose(result.location, Z.mean(axis=0))


def _masked_design(seed=9):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(75, 2))
    Z[:10] = [100.0, 0.0]
    return Dataset.from_arrays(Z, rng.normal(size=75))


def test_mcd_excludes_identical_leverage_group():
    data = _masked_design()
    result = mcd_fit(data, coverage=40, n_starts=100, seed=1, pool=IterationPool(1))
    assert len(result.subset) == 40
    assert not set(range(10)) & set(result.subset.tolist())


def test_mcd_beats_random_subsets():
    rng = np.random.default_rng(10)
    Z = rng.normal(size=(20, 2))
    Z[:3] += 6.0
    data = Dataset.from_arrays(Z, rng.normal(size=20))
    result = mcd_fit(data, n_starts=200, seed=4, pool=IterationPool(1))
    k = len(result.subset)
    for _ in range(200):
        subset = rng.choice(20, size=k, replace=False)
        sign, log_det = np.linalg.slogdet(np.cov(Z[subset], rowvar=False, bias=True))
        assert result.log_det <= log_det + 1e-9


def test_mcd_c_steps_never_increase_determinant():
    rng = np.random.default_rng(12)
    Z = rng.standard_t(3, size=(50, 3))
    subset = np.arange(0, 50, 2)[:26]
    previous = np.inf
    for _ in range(6):
        subset, log_det = mcd_c_step(Z, subset, 26)
        assert log_det <= previous + 1e-10
        previous = log_det


def test_mcd_singular_scatter():
    x = np.random.default_rng(13).normal(size=20)
    data = Dataset.from_arrays(np.column_stack([x, 2 * x]), np.zeros(20), add_intercept=False)
    with pytest.raises(SingularScatter):
        mcd_fit(data, n_starts=5)


def test_robust_leverages_full_subset_are_ordinary():
    rng = np.random.default_rng(14)
    data = Dataset.from_arrays(rng.normal(size=(25, 2)), rng.normal(size=25))
    assert_allclose(robust_leverages(data, np.arange(25)), hat_values(data, np.arange(25)))


def test_robust_leverage_of_constant_design():
    data = Dataset(np.ones((10, 1)), np.arange(10.0))
    h_star = robust_leverages(data, np.arange(6))
    assert_allclose(h_star[6:], 1.0 / 7.0)
    assert_allclose(h_star[:6], 1.0 / 6.0)


def test_robust_leverages_unmask_the_group():
    data = _masked_design()
    result = mcd_fit(data, coverage=40, n_starts=100, seed=1, pool=IterationPool(1))
    ordinary = hat_values(data, np.arange(75))
    assert np.all(result.robust_leverages[:10] > ordinary[:10])
    assert np.all(result.robust_leverages < 1 - 1e-12)
    assert np.all(result.robust_leverages >= 0)
