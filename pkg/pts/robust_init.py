"""
Robust starting ingredients for PTS.

Approximate Least Trimmed Squares (random elemental starts refined by
concentration steps) gives the robust error scale; approximate Minimum
Covariance Determinant gives the clean design rows and the unmasked robust
leverages.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import norm

from . import config
from .errors import BudgetExceeded, DegenerateData, DegenerateWeights, RankDeficient, SingularScatter
from .linalg_core import Dataset, SubsetIndex, factorize, ols_fit, subset_rss
from .worker_pool import IterationPool

logger = logging.getLogger(__name__)

# Relative slack allowed when asserting that concentration steps never increase the objective
_MONOTONE_SLACK = 1e-10


@dataclass
class LtsResult:
    """Approximate LTS fit with coverage k."""
    beta_lts: np.ndarray
    subset: SubsetIndex
    coverage: int
    objective: float
    residuals: np.ndarray


@dataclass
class RobustScale:
    """Preliminary scale, reweighted scale and the 0/1 weights that produced it."""
    s_hat: float
    sigma_hat: float
    weights: np.ndarray
    c_consistency: float
    alpha_kn: float


@dataclass
class McdResult:
    """Approximate MCD on the non-constant columns of X."""
    subset: SubsetIndex
    robust_leverages: np.ndarray
    dropped_constant_columns: List[int] = field(default_factory=list)
    location: Optional[np.ndarray] = None
    scatter: Optional[np.ndarray] = None
    log_det: float = 0.0


def default_coverage(n: int, p: int) -> int:
    """Coverage of roughly half the sample: floor((n + p + 1) / 2), capped at n."""
    return min(n, (n + p + 1) // 2)


def residual_tolerance(y: np.ndarray) -> float:
    """Magnitude below which a residual counts as an exact zero."""
    return 1e-9 * (1.0 + float(np.max(np.abs(y)))) if len(y) else 1e-9


def _k_smallest(values: np.ndarray, k: int) -> SubsetIndex:
    order = np.argsort(values, kind='stable')
    return np.sort(order[:k])


def _check_coverage(n: int, p: int, k: int) -> None:
    if not p <= k <= n:
        raise ValueError(f"Coverage k={k} must satisfy p={p} <= k <= n={n}")


# ---------------------------------------------------------------------------
# Least Trimmed Squares
# ---------------------------------------------------------------------------

def c_step(data: Dataset, subset: SubsetIndex, k: int) -> Tuple[SubsetIndex, float, np.ndarray]:
    """
    One concentration step.

    Fits OLS on subset, then keeps the k rows with the smallest squared
    residuals under that fit.

    Args:
        data: Dataset
        subset: Current subset (full rank)
        k: Coverage

    Returns:
        (new_subset, objective, beta) where objective is the sum of the k
        smallest squared residuals under the fit of the current subset

    Raises:
        RankDeficient: if subset does not admit a full-rank fit
    """
    fit = ols_fit(data, subset)
    r2 = fit.residuals ** 2
    new_subset = _k_smallest(r2, k)
    return new_subset, float(r2[new_subset].sum()), fit.beta


def _concentrate(data: Dataset, subset: SubsetIndex, k: int, max_steps: int,
                 warn_on_cap: bool = False) -> Tuple[SubsetIndex, float]:
    """Run up to max_steps C-steps; returns the last subset and its trimmed objective."""
    proposal, objective, _ = c_step(data, subset, k)
    for _ in range(max_steps):
        if np.array_equal(proposal, subset) or objective == 0.0:
            break
        next_proposal, next_objective, _ = c_step(data, proposal, k)
        if next_objective > objective * (1.0 + _MONOTONE_SLACK):
            logger.warning(f"C-step increased the LTS objective ({objective:.6g} -> {next_objective:.6g}); stopping")
            break
        subset, proposal, objective = proposal, next_proposal, next_objective
    else:
        if warn_on_cap and not (np.array_equal(proposal, subset) or objective == 0.0):
            logger.warning(f"LTS concentration stopped at the cap of {max_steps} C-steps before a fixed point")
    return subset, objective


def _elemental_subset(data: Dataset, rng: np.random.Generator, size: int) -> Optional[SubsetIndex]:
    """Draw `size` random rows, adding further random rows until the design has full rank."""
    n = data.n
    order = rng.permutation(n)
    m = min(size, n)
    while m <= n:
        subset = np.sort(order[:m])
        try:
            factorize(data, subset)
            return subset
        except RankDeficient:
            m += 1
    return None


def _lts_start(data: Dataset, k: int, seed: int, start: int) -> Optional[Tuple[float, int, SubsetIndex]]:
    rng = np.random.default_rng([seed, config.STREAM_LTS, start])
    elemental = _elemental_subset(data, rng, data.p + 1)
    if elemental is None:
        return None
    try:
        initial, _, _ = c_step(data, elemental, k)
        subset, objective = _concentrate(data, initial, k, config.CSTEP_INITIAL)
    except RankDeficient:
        return None
    return objective, start, subset


def _refine_lts(data: Dataset, k: int, candidate: Tuple[float, int, SubsetIndex]):
    _, start, subset = candidate
    try:
        subset, objective = _concentrate(data, subset, k, config.CSTEP_MAX, warn_on_cap=True)
    except RankDeficient:
        return None
    return objective, start, subset


def _lts_result(data: Dataset, subset: SubsetIndex, k: int) -> LtsResult:
    fit = ols_fit(data, subset)
    r2 = fit.residuals ** 2
    return LtsResult(beta_lts=fit.beta, subset=fit.subset, coverage=k,
                     objective=float(r2[subset].sum()), residuals=fit.residuals)


def lts_fit(data: Dataset, coverage: Optional[int] = None, n_starts: int = config.DEFAULT_LTS_STARTS,
            seed: int = config.DEFAULT_SEED, pool: Optional[IterationPool] = None) -> LtsResult:
    """
    Approximate LTS by random elemental starts and concentration steps.

    Every start draws p+1 rows and runs two C-steps; the best starts are then
    iterated to a fixed point. Ties are resolved by the lowest start index.

    Args:
        data: Dataset
        coverage: Number of observations fitted (default floor((n+p+1)/2))
        n_starts: Number of random elemental starts
        seed: Master seed
        pool: Worker pool for the starts

    Returns:
        LtsResult

    Raises:
        DegenerateData: if no start admits a full-rank subset
    """
    n, p = data.n, data.p
    k = default_coverage(n, p) if coverage is None else int(coverage)
    _check_coverage(n, p, k)

    if k == n:
        try:
            return _lts_result(data, np.arange(n), k)
        except RankDeficient as e:
            raise DegenerateData(f"Design has rank below p={p}") from e

    pool = pool or IterationPool()
    candidates = [c for c in pool.map(lambda s: _lts_start(data, k, seed, s), n_starts) if c is not None]
    if not candidates:
        raise DegenerateData(f"No full-rank subset of {k} rows found in {n_starts} starts")

    candidates.sort(key=lambda c: (c[0], c[1]))
    best = candidates[:config.CSTEP_KEEP_BEST]
    refined = [r for r in pool.map(lambda i: _refine_lts(data, k, best[i]), len(best)) if r is not None]
    if not refined:
        raise DegenerateData(f"Every refined LTS start lost full rank (k={k})")
    objective, start, subset = min(refined, key=lambda c: (c[0], c[1]))

    result = _lts_result(data, subset, k)
    logger.debug(f"LTS: k={k}, best start {start}, objective {objective:.6g}")
    return result


def lts_exact(data: Dataset, coverage: Optional[int] = None,
              budget: int = config.LTS_ENUMERATION_BUDGET) -> LtsResult:
    """Global LTS optimum by enumerating every k-subset (small n only).

    Raises:
        BudgetExceeded: if C(n, k) exceeds budget
        DegenerateData: if every k-subset is rank deficient
    """
    n, p = data.n, data.p
    k = default_coverage(n, p) if coverage is None else int(coverage)
    _check_coverage(n, p, k)

    required = math.comb(n, k)
    if required > budget:
        raise BudgetExceeded(f"C({n},{k}) = {required} subsets exceeds the budget of {budget}",
                             required=required, budget=budget)

    best_rss = math.inf
    best_subset = None
    for combo in combinations(range(n), k):
        subset = np.fromiter(combo, dtype=np.intp, count=k)
        rss = subset_rss(data.X, data.y, subset)
        if rss is not None and rss < best_rss:
            best_rss, best_subset = rss, subset

    if best_subset is None:
        raise DegenerateData(f"Every {k}-subset of the design is rank deficient")
    return _lts_result(data, best_subset, k)


# ---------------------------------------------------------------------------
# Robust scale
# ---------------------------------------------------------------------------

def consistency_factor(k: int, n: int) -> Tuple[float, float]:
    """
    Consistency constant c_{k,n} of the trimmed scale at the normal model.

    Returns:
        (c_kn, alpha_kn); without trimming (k = n) the limit c = 1, alpha = 0
    """
    if k >= n:
        return 1.0, 0.0
    q = float(norm.ppf((k + n) / (2.0 * n)))
    alpha = 1.0 / q
    c = 1.0 / math.sqrt(1.0 - (2.0 * n / (k * alpha)) * float(norm.pdf(q)))
    return c, alpha


def robust_scale(data: Dataset, lts: LtsResult) -> RobustScale:
    """
    Reweighted LTS error scale.

    Args:
        data: Dataset the LTS fit was computed on
        lts: LTS result

    Returns:
        RobustScale

    Raises:
        DegenerateWeights: if the reweighting keeps p or fewer observations
    """
    n, p = data.n, data.p
    k = lts.coverage
    if k != default_coverage(n, p):
        logger.warning(f"Robust scale computed from non-default LTS coverage k={k}")

    c_kn, alpha_kn = consistency_factor(k, n)
    r = lts.residuals
    r2_sorted = np.sort(r ** 2)
    s_hat = c_kn * math.sqrt(float(r2_sorted[:k].mean()))

    tol = residual_tolerance(data.y)
    if s_hat <= tol:
        weights = (np.abs(r) <= tol).astype(float)
        return RobustScale(s_hat=0.0, sigma_hat=0.0, weights=weights, c_consistency=c_kn, alpha_kn=alpha_kn)

    weights = (np.abs(r / s_hat) <= config.REWEIGHT_CUTOFF).astype(float)
    denominator = weights.sum() - p
    if denominator <= 0:
        partial = RobustScale(s_hat=s_hat, sigma_hat=float('nan'), weights=weights,
                              c_consistency=c_kn, alpha_kn=alpha_kn)
        raise DegenerateWeights(f"Reweighting kept {int(weights.sum())} observations, need more than p={p}",
                                scale=partial)

    sigma_hat = math.sqrt(float(np.dot(weights, r ** 2)) / denominator)
    return RobustScale(s_hat=s_hat, sigma_hat=sigma_hat, weights=weights, c_consistency=c_kn, alpha_kn=alpha_kn)


# ---------------------------------------------------------------------------
# Minimum Covariance Determinant
# ---------------------------------------------------------------------------

def _constant_columns(X: np.ndarray) -> List[int]:
    return [j for j in range(X.shape[1]) if np.ptp(X[:, j]) == 0.0]


def _location_scatter(Z: np.ndarray, subset: SubsetIndex):
    """Mean, scatter and lower Cholesky factor of Z[subset]; raises SingularScatter."""
    Z_S = Z[subset]
    location = Z_S.mean(axis=0)
    centered = Z_S - location
    scatter = centered.T @ centered / len(subset)
    try:
        L = linalg.cholesky(scatter, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise SingularScatter("Scatter matrix is not positive definite") from e
    diag = np.diag(L)
    if diag.min() <= config.RANK_TOL * diag.max():
        raise SingularScatter("Scatter matrix is numerically singular")
    return location, scatter, L


def mcd_c_step(Z: np.ndarray, subset: SubsetIndex, k: int) -> Tuple[SubsetIndex, float]:
    """
    One MCD concentration step on the data matrix Z.

    Returns:
        (new_subset, log_det) where log_det is the log-determinant of the
        scatter of the current subset and new_subset holds the k rows with the
        smallest Mahalanobis distances under its location and scatter

    Raises:
        SingularScatter: if the current subset has a singular scatter matrix
    """
    location, _, L = _location_scatter(Z, subset)
    D = linalg.solve_triangular(L, (Z - location).T, lower=True, check_finite=False)
    distances = np.einsum('ij,ij->j', D, D)
    log_det = 2.0 * float(np.log(np.diag(L)).sum())
    return _k_smallest(distances, k), log_det


def _mcd_concentrate(Z: np.ndarray, subset: SubsetIndex, k: int, max_steps: int,
                     warn_on_cap: bool = False) -> Tuple[SubsetIndex, float]:
    proposal, log_det = mcd_c_step(Z, subset, k)
    for _ in range(max_steps):
        if np.array_equal(proposal, subset):
            break
        next_proposal, next_log_det = mcd_c_step(Z, proposal, k)
        if next_log_det > log_det + _MONOTONE_SLACK * max(1.0, abs(log_det)):
            logger.warning(f"MCD C-step increased log det ({log_det:.6g} -> {next_log_det:.6g}); stopping")
            break
        subset, proposal, log_det = proposal, next_proposal, next_log_det
    else:
        if warn_on_cap and not np.array_equal(proposal, subset):
            logger.warning(f"MCD concentration stopped at the cap of {max_steps} C-steps before a fixed point")
    return subset, log_det


def _mcd_start(Z: np.ndarray, k: int, seed: int, start: int):
    n, q = Z.shape
    rng = np.random.default_rng([seed, config.STREAM_MCD, start])
    order = rng.permutation(n)
    m = min(q + 1, n)
    while True:
        try:
            _location_scatter(Z, np.sort(order[:m]))
            break
        except SingularScatter:
            m += 1
            if m > n:
                return None
    try:
        initial, _ = mcd_c_step(Z, np.sort(order[:m]), k)
        subset, log_det = _mcd_concentrate(Z, initial, k, config.CSTEP_INITIAL)
    except SingularScatter:
        return None
    return log_det, start, subset


def _refine_mcd(Z: np.ndarray, k: int, candidate):
    _, start, subset = candidate
    try:
        subset, log_det = _mcd_concentrate(Z, subset, k, config.CSTEP_MAX, warn_on_cap=True)
    except SingularScatter:
        return None
    return log_det, start, subset


def mcd_fit(data: Dataset, coverage: Optional[int] = None, n_starts: int = config.DEFAULT_MCD_STARTS,
            seed: int = config.DEFAULT_SEED, pool: Optional[IterationPool] = None) -> McdResult:
    """
    Approximate MCD subset of the design rows, followed by robust leverages.

    Constant columns (an intercept, for instance) are left out of the
    location/scatter computation but kept for the leverages.

    Args:
        data: Dataset
        coverage: Subset size (default floor((n+p+1)/2))
        n_starts: Number of random elemental starts
        seed: Master seed
        pool: Worker pool for the starts

    Returns:
        McdResult

    Raises:
        SingularScatter: if every start collapses to a singular scatter
    """
    n, p = data.n, data.p
    k = default_coverage(n, p) if coverage is None else int(coverage)
    dropped = _constant_columns(data.X)
    kept = [j for j in range(p) if j not in dropped]
    Z = data.X[:, kept]
    q = Z.shape[1]
    if k < q + 1 or k > n:
        raise DegenerateData(f"MCD coverage k={k} must lie in [{q + 1}, {n}]")

    if q == 0:
        subset = np.arange(k)
        return McdResult(subset=subset, robust_leverages=robust_leverages(data, subset),
                         dropped_constant_columns=dropped, location=np.empty(0),
                         scatter=np.empty((0, 0)), log_det=0.0)

    if k == n:
        subset = np.arange(n)
        _, log_det = mcd_c_step(Z, subset, k)
    else:
        pool = pool or IterationPool()
        candidates = [c for c in pool.map(lambda s: _mcd_start(Z, k, seed, s), n_starts) if c is not None]
        if not candidates:
            raise SingularScatter(f"All {n_starts} MCD starts collapsed to a singular scatter")
        candidates.sort(key=lambda c: (c[0], c[1]))
        best = candidates[:config.CSTEP_KEEP_BEST]
        refined = [r for r in pool.map(lambda i: _refine_mcd(Z, k, best[i]), len(best)) if r is not None]
        if not refined:
            raise SingularScatter("Every refined MCD start collapsed to a singular scatter")
        log_det, start, subset = min(refined, key=lambda c: (c[0], c[1]))
        logger.debug(f"MCD: k={k}, best start {start}, log det {log_det:.6g}")

    location, scatter, _ = _location_scatter(Z, subset)
    return McdResult(subset=subset, robust_leverages=robust_leverages(data, subset),
                     dropped_constant_columns=dropped, location=location, scatter=scatter,
                     log_det=log_det)


def robust_leverages(data: Dataset, mcd_subset: SubsetIndex) -> np.ndarray:
    """
    Leverage of every row with respect to the clean rows plus the row itself.

    Rows inside the subset get their ordinary leverage in X_S; a row outside
    gets x_i'(X_S'X_S + x_i x_i')^-1 x_i = h_i / (1 + h_i).

    Raises:
        RankDeficient: if X restricted to mcd_subset is rank deficient
    """
    subset = np.asarray(mcd_subset, dtype=np.intp)
    h = factorize(data, subset).hat_values(data.X)
    inside = np.zeros(data.n, dtype=bool)
    inside[subset] = True
    return np.where(inside, h, h / (1.0 + h))
