"""
Penalized Trimmed Squares estimator.

The combinatorial objective of a clean subset T is

    L(T) = sum_{i in T} r(beta_T)_i^2 + sum_{i not in T} p_i

where beta_T is the OLS fit on T and p_i is the price of deleting row i.
Fast-PTS minimizes L by randomized greedy construction of penalty-free
subsets, each followed by a fixed-point local search.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional

import numpy as np

from . import config
from .errors import AllInfeasible, BudgetExceeded, DegenerateWeights, RankDeficient, StartFailure
from .linalg_core import Dataset, SubsetIndex, as_subset, complement, factorize, ols_fit, subset_rss
from .robust_init import (LtsResult, McdResult, RobustScale, lts_fit, mcd_fit, residual_tolerance,
                          robust_scale)
from .schemas import PtsConfig
from .worker_pool import IterationPool

logger = logging.getLogger(__name__)


@dataclass
class PenaltyVector:
    """Per-observation deletion penalties and the robust ingredients behind them."""
    p: np.ndarray
    sigma_hat: float
    h_star: np.ndarray
    lts: Optional[LtsResult] = None
    scale: Optional[RobustScale] = None
    mcd: Optional[McdResult] = None

    @classmethod
    def from_values(cls, values, sigma_hat: float = float('nan')) -> "PenaltyVector":
        """Penalties given directly (no robust pipeline behind them)."""
        p = np.asarray(values, dtype=float).copy()
        return cls(p=p, sigma_hat=sigma_hat, h_star=np.zeros_like(p))


@dataclass
class PtsSolution:
    clean: SubsetIndex
    beta: np.ndarray
    objective: float
    outliers: SubsetIndex
    k: int
    objective_trace: List[float] = field(default_factory=list)
    reincluded: SubsetIndex = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    search_clean: Optional[SubsetIndex] = None
    search_objective: Optional[float] = None
    penalties: Optional[PenaltyVector] = None
    iterations: int = 0
    sigma_hat: float = float('nan')


def compute_penalties(data: Dataset, cfg: PtsConfig, pool: Optional[IterationPool] = None) -> PenaltyVector:
    """
    Robust penalties p_i = max(eps, (c * sqrt(1 - h_i*) * sigma_hat)^2).

    Runs LTS, the reweighted scale, MCD and the robust leverages. When the
    reweighting keeps too few rows the preliminary scale is used instead.

    Args:
        data: Dataset
        cfg: Estimator configuration
        pool: Worker pool for the random starts

    Returns:
        PenaltyVector
    """
    pool = pool or IterationPool(cfg.threads)

    lts = lts_fit(data, coverage=cfg.lts_coverage, n_starts=cfg.lts_starts, seed=cfg.seed, pool=pool)
    logger.info(f"LTS fit done: k={lts.coverage}, objective={lts.objective:.6g}")

    try:
        scale = robust_scale(data, lts)
    except DegenerateWeights as e:
        logger.warning(f"{e}; falling back to the preliminary scale")
        scale = dataclasses.replace(e.scale, sigma_hat=e.scale.s_hat)
    sigma_hat = scale.sigma_hat
    logger.info(f"Robust scale: s_hat={scale.s_hat:.6g}, sigma_hat={sigma_hat:.6g}")

    mcd = mcd_fit(data, n_starts=cfg.mcd_starts, seed=cfg.seed, pool=pool)
    logger.info(f"MCD done: {len(mcd.subset)} clean design rows, "
                f"dropped constant columns {mcd.dropped_constant_columns}")

    h_star = mcd.robust_leverages
    values = (cfg.cutoff_c * np.sqrt(np.clip(1.0 - h_star, 0.0, None)) * sigma_hat) ** 2
    penalties = np.maximum(cfg.epsilon_floor, values)
    return PenaltyVector(p=penalties, sigma_hat=sigma_hat, h_star=h_star, lts=lts, scale=scale, mcd=mcd)


def _objective_of_fit(residuals: np.ndarray, clean: SubsetIndex, pen: PenaltyVector) -> float:
    mask = np.ones(len(residuals), dtype=bool)
    mask[clean] = False
    r_clean = residuals[clean]
    return float(np.dot(r_clean, r_clean) + pen.p[mask].sum())


def objective(data: Dataset, T, pen: PenaltyVector) -> float:
    """L(T); rank-deficient subsets are infeasible and return +inf."""
    clean = as_subset(T, data.n)
    rss = subset_rss(data.X, data.y, clean)
    if rss is None:
        return math.inf
    return rss + float(pen.p[complement(clean, data.n)].sum())


def is_penalty_free(data: Dataset, T, pen: PenaltyVector) -> bool:
    """True iff every row of T has squared residual strictly below its penalty under beta_T."""
    clean = as_subset(T, data.n)
    try:
        fit = ols_fit(data, clean)
    except RankDeficient:
        return False
    return bool(np.all(fit.residuals[clean] ** 2 < pen.p[clean]))


def optimality_violations(data: Dataset, T, pen: PenaltyVector, tol: float = 1e-9) -> List[int]:
    """
    Rows breaking the necessary optimality conditions of (T, beta_T).

    Clean rows need r_i^2 <= p_i and deleted rows need r_i^2 >= p_i, both up
    to a relative tolerance.
    """
    clean = as_subset(T, data.n)
    fit = ols_fit(data, clean)
    r2 = fit.residuals ** 2
    slack = tol * np.maximum(1.0, pen.p)
    inside = np.zeros(data.n, dtype=bool)
    inside[clean] = True
    bad = (inside & (r2 > pen.p + slack)) | (~inside & (r2 < pen.p - slack))
    return np.flatnonzero(bad).tolist()


def _random_start(data: Dataset, pen: PenaltyVector, rng: np.random.Generator) -> SubsetIndex:
    """Penalty-free (p+1)-subset, or a full-rank p-subset when none turns up."""
    n, p = data.n, data.p
    if n > p:
        for _ in range(config.START_ATTEMPTS):
            T = np.sort(rng.choice(n, size=p + 1, replace=False))
            if is_penalty_free(data, T, pen):
                return T
        logger.warning(f"No penalty-free {p + 1}-subset in {config.START_ATTEMPTS} draws; starting from {p} rows")

    for _ in range(config.START_ATTEMPTS):
        T = np.sort(rng.choice(n, size=p, replace=False))
        try:
            factorize(data, T)
            return T
        except RankDeficient:
            continue
    raise StartFailure(f"No full-rank {p}-subset found in {config.START_ATTEMPTS} draws")


def construct(data: Dataset, pen: PenaltyVector, cfg: PtsConfig, rng: np.random.Generator) -> SubsetIndex:
    """
    Randomized greedy construction of a maximal penalty-free subset.

    Each round scores every row j outside T by L(T + j) using a rank-one update
    of the inverse Gram matrix, keeps the candidates whose addition leaves every
    row of T + j penalty-free, and adds one drawn uniformly from the best
    max(1, ceil(alpha * |C|)) of them.

    The inverse Gram matrix, coefficients and residuals are carried across
    rounds by Sherman-Morrison updates. A row i of T can only become infeasible
    after adding j if |r_i| + sqrt(h_i h_j) |step_j| >= sqrt(p_i), so the exact
    check runs on the rows failing that bound only.

    Args:
        data: Dataset
        pen: Penalties
        cfg: Configuration (alpha_greed)
        rng: Random stream of this iteration

    Returns:
        Sorted clean subset

    Raises:
        StartFailure: if not even a full-rank p-subset can be drawn
    """
    X, y, n = data.X, data.y, data.n
    in_T = np.zeros(n, dtype=bool)
    in_T[_random_start(data, pen, rng)] = True
    root_p = np.sqrt(pen.p)
    since_refactor = config.CONSTRUCT_REFACTOR_EVERY

    while not in_T.all():
        if since_refactor >= config.CONSTRUCT_REFACTOR_EVERY:
            factor = factorize(data, np.flatnonzero(in_T))
            G = factor.gram_inverse().copy()
            residuals = y - X @ factor.beta
            since_refactor = 0

        T = np.flatnonzero(in_T)
        C = np.flatnonzero(~in_T)
        XG = X @ G
        h = np.maximum(np.einsum('ij,ij->i', XG, X), 0.0)
        r_C = residuals[C]
        step = r_C / (1.0 + h[C])

        screened = step ** 2 < pen.p[C]
        if not screened.any():
            break
        C_s, step_s = C[screened], step[screened]

        # rows of T that some candidate could push over their penalty
        reach = np.sqrt(h[C_s]) * np.abs(step_s)
        slack = root_p[T] - np.abs(residuals[T])
        at_risk = T[slack <= np.sqrt(h[T]) * reach.max() * (1.0 + 1e-9)]

        feasible = np.ones(len(C_s), dtype=bool)
        if len(at_risk):
            R = residuals[at_risk][:, None] - (XG[at_risk] @ X[C_s].T) * step_s[None, :]
            feasible = np.all(R ** 2 < pen.p[at_risk][:, None], axis=0)
        if not feasible.any():
            break

        rss_T = float(np.dot(residuals[T], residuals[T]))
        penalty_out = float(pen.p[C].sum())
        candidates = C_s[feasible]
        scores = rss_T + r_C[screened][feasible] * step_s[feasible] + penalty_out - pen.p[candidates]

        order = np.lexsort((candidates, scores))
        width = max(1, math.ceil(cfg.alpha_greed * len(candidates)))
        chosen = candidates[order[rng.integers(width)]]

        g = XG[chosen]
        d = 1.0 + h[chosen]
        residuals = residuals - (X @ g) * (residuals[chosen] / d)
        G -= np.outer(g, g) / d
        in_T[chosen] = True
        since_refactor += 1

    return np.flatnonzero(in_T)


def local_search(data: Dataset, pen: PenaltyVector, T0) -> SubsetIndex:
    """
    Iterate T <- {i : r(beta_T)_i^2 < p_i} to a fixed point.

    L never increases along the iterates. If an iterate is rank deficient the
    last full-rank iterate is returned; if the iteration cap is hit the best
    iterate seen is returned.

    Raises:
        RankDeficient: if T0 itself is rank deficient
    """
    T = as_subset(T0, data.n)
    fit = ols_fit(data, T)
    best_T, best_L = T, _objective_of_fit(fit.residuals, T, pen)

    for iteration in range(config.LOCAL_SEARCH_MAX_ITER):
        T_next = np.flatnonzero(fit.residuals ** 2 < pen.p)
        if np.array_equal(T_next, T):
            return T
        try:
            fit = ols_fit(data, T_next)
        except RankDeficient:
            logger.warning(f"Local search reached a rank-deficient subset of {len(T_next)} rows; "
                           f"keeping the previous iterate")
            return T
        T = T_next
        L = _objective_of_fit(fit.residuals, T, pen)
        logger.debug(f"Local search step {iteration + 1}: |T|={len(T)}, L={L:.10g}")
        if L < best_L:
            best_T, best_L = T, L

    logger.warning(f"Local search hit the cap of {config.LOCAL_SEARCH_MAX_ITER} iterations")
    return best_T


def _solution(data: Dataset, T: SubsetIndex, pen: PenaltyVector, **extra) -> PtsSolution:
    fit = ols_fit(data, T)
    return PtsSolution(clean=fit.subset, beta=fit.beta,
                       objective=_objective_of_fit(fit.residuals, fit.subset, pen),
                       outliers=complement(fit.subset, data.n), k=len(fit.subset),
                       penalties=pen, sigma_hat=pen.sigma_hat, **extra)


def fast_pts(data: Dataset, cfg: Optional[PtsConfig] = None, penalties: Optional[PenaltyVector] = None,
             reinclusion: bool = True, pool: Optional[IterationPool] = None) -> PtsSolution:
    """
    Fast-PTS: repeated construction + local search, best subset wins.

    Args:
        data: Dataset
        cfg: Configuration (defaults when None)
        penalties: Precomputed penalties; computed from data when None
        reinclusion: Apply the reinclusion stage to the best subset
        pool: Worker pool shared by the random starts and iterations

    Returns:
        PtsSolution; search_clean / search_objective hold the pre-reinclusion optimum

    Raises:
        AllInfeasible: if neither the full set nor any iteration yields a feasible subset
    """
    cfg = cfg or PtsConfig()
    pool = pool or IterationPool(cfg.threads)
    pen = penalties if penalties is not None else compute_penalties(data, cfg, pool)

    try:
        T_full = local_search(data, pen, np.arange(data.n))
        incumbent = (objective(data, T_full, pen), -1, T_full)
    except RankDeficient:
        incumbent = None

    def run_iteration(index: int):
        rng = np.random.default_rng([cfg.seed, config.STREAM_PTS, index])
        try:
            T = local_search(data, pen, construct(data, pen, cfg, rng))
        except (StartFailure, RankDeficient) as e:
            logger.debug(f"Iteration {index} failed: {e}")
            return None
        return objective(data, T, pen), index, T

    results = pool.map(run_iteration, cfg.max_iter)

    best = incumbent
    trace = []
    for result in results:
        if result is not None and (best is None or result[0] < best[0]):
            best = result
        trace.append(best[0] if best is not None else math.inf)
        if result is not None:
            logger.debug(f"Iteration {result[1]}: L={result[0]:.10g}, best={best[0]:.10g}")

    if best is None:
        raise AllInfeasible(f"All {cfg.max_iter} Fast-PTS iterations failed")

    L_best, index, T_best = best
    solution = _solution(data, T_best, pen, objective_trace=trace, search_clean=T_best,
                         search_objective=L_best, iterations=cfg.max_iter)
    logger.info(f"Fast-PTS: best objective {L_best:.10g} from iteration {index}, "
                f"{len(solution.outliers)} flagged")

    if reinclusion:
        solution = reinclude(data, solution, pen.sigma_hat, cfg)
    return solution


def reinclude(data: Dataset, sol: PtsSolution, sigma_hat: float, cfg: Optional[PtsConfig] = None) -> PtsSolution:
    """
    Return flagged rows whose studentized predicted residual is small.

    t_i = r_i / (sigma_hat * sqrt(1 + h_i)), with r_i and h_i taken against the
    fit on the current clean set. All rows with |t_i| <= t_reinclude go back in
    a single pass and beta is refitted. With sigma_hat = 0 only exact-fit rows
    qualify.
    """
    cfg = cfg or PtsConfig()
    flagged = sol.outliers
    if flagged.size == 0:
        return sol

    factor = factorize(data, sol.clean)
    residuals = data.y[flagged] - data.X[flagged] @ factor.beta
    if sigma_hat > 0:
        h = factor.hat_values(data.X[flagged])
        t = residuals / (sigma_hat * np.sqrt(1.0 + h))
        back = flagged[np.abs(t) <= cfg.t_reinclude]
    else:
        back = flagged[np.abs(residuals) <= residual_tolerance(data.y)]

    logger.info(f"Reinclusion: {len(back)} of {len(flagged)} flagged rows returned")
    if back.size == 0:
        return sol

    clean = np.union1d(sol.clean, back)
    pen = sol.penalties
    fit = ols_fit(data, clean)
    L = _objective_of_fit(fit.residuals, fit.subset, pen) if pen is not None else sol.objective
    return dataclasses.replace(sol, clean=fit.subset, beta=fit.beta, objective=L,
                               outliers=complement(fit.subset, data.n), k=len(fit.subset),
                               reincluded=back)


def check_enumeration_budget(n: int, budget: int = config.PTS_ENUMERATION_BUDGET) -> None:
    """Raise BudgetExceeded when enumerating all 2^n subsets is over budget."""
    required = 2 ** n
    if required > budget:
        raise BudgetExceeded(f"Exact PTS needs 2^{n} = {required} subsets, budget is {budget}",
                             required=required, budget=budget)


def exact_pts(data: Dataset, pen: PenaltyVector, budget: int = config.PTS_ENUMERATION_BUDGET) -> PtsSolution:
    """
    Global minimum of L(T) by enumeration, largest subsets first.

    A subset is skipped without fitting when its deletion penalties alone
    already reach the best objective found.

    Raises:
        BudgetExceeded: if 2^n exceeds budget
    """
    n, p = data.n, data.p
    check_enumeration_budget(n, budget)

    total_penalty = float(pen.p.sum())
    best_L, best_T = math.inf, None
    for size in range(n, p - 1, -1):
        for combo in combinations(range(n), size):
            T = np.fromiter(combo, dtype=np.intp, count=size)
            penalty_part = total_penalty - float(pen.p[T].sum())
            if penalty_part >= best_L:
                continue
            rss = subset_rss(data.X, data.y, T)
            if rss is None:
                continue
            if rss + penalty_part < best_L:
                best_L, best_T = rss + penalty_part, T

    if best_T is None:
        raise AllInfeasible("No subset of the design has full column rank")
    solution = _solution(data, best_T, pen, search_clean=best_T, iterations=0)
    solution.objective = objective(data, best_T, pen)
    solution.search_objective = solution.objective
    solution.objective_trace = [solution.objective]
    return solution
