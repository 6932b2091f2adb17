"""
Monte Carlo harness: repeat generate -> fit -> evaluate and summarize.
"""
import logging
import time
from typing import Callable, Dict, List, Optional

import numpy as np

from .datagen import MIXED_LTS_COVERAGE, Sample, eval_run, gen_barrera_yohai, gen_mixed_contamination
from .errors import PtsError
from .pts_core import fast_pts
from .schemas import Design, PtsConfig, SimSpec, SimulationSummary
from .worker_pool import IterationPool

logger = logging.getLogger(__name__)


def _generator(spec: SimSpec, design: Design) -> Callable[[int], Sample]:
    if design == Design.BARRERA_YOHAI:
        return lambda rep: gen_barrera_yohai(spec, rep)
    if design == Design.MIXED_GOOD_BAD:
        return lambda rep: gen_mixed_contamination(spec.seed, rep, spec.x_outliers, spec.good_leverage,
                                                   spec.y_outliers)
    return lambda rep: gen_mixed_contamination(spec.seed, rep, spec.x_outliers, 0, spec.y_outliers)


def run_replication(sample: Sample, cfg: PtsConfig, pool: Optional[IterationPool] = None) -> Dict:
    """Fit one generated sample and score it against the truth."""
    started = time.process_time()
    solution = fast_pts(sample.dataset, cfg, pool=pool)
    cpu_seconds = time.process_time() - started
    metrics = eval_run(solution.beta, sample.beta_true, contamination_beta=sample.contamination_beta)
    return {
        'beta': solution.beta,
        'mse': metrics['mse'],
        'wrong_convergence': metrics['wrong_convergence'],
        'cpu_seconds': cpu_seconds,
        'flagged': len(solution.outliers),
    }


def run_simulation(spec: SimSpec, cfg: Optional[PtsConfig] = None,
                   design: Design = Design.BARRERA_YOHAI) -> SimulationSummary:
    """
    Run spec.replications replications of a contaminated design through Fast-PTS.

    Replications run one after another; each fit parallelizes its own starts
    and iterations. Replications whose fit raises a PtsError are counted as
    failures and left out of the averages.

    Args:
        spec: Simulation settings (size, contamination, slope, replications, seed)
        cfg: Estimator configuration
        design: Which contamination generator to use

    Returns:
        SimulationSummary with %wrong, aggregate and per-coefficient MSE,
        mean estimate and mean CPU seconds
    """
    cfg = cfg or PtsConfig(seed=spec.seed)
    design = Design(design)
    if design != Design.BARRERA_YOHAI and cfg.lts_coverage is None:
        cfg = cfg.model_copy(update={'lts_coverage': MIXED_LTS_COVERAGE})
    generate = _generator(spec, design)
    pool = IterationPool(cfg.threads)

    results: List[Dict] = []
    truths: List[np.ndarray] = []
    failures = 0
    for rep in range(spec.replications):
        sample = generate(rep)
        try:
            results.append(run_replication(sample, cfg, pool))
            truths.append(sample.beta_true)
        except PtsError as e:
            failures += 1
            logger.warning(f"Replication {rep} failed: {e}")
        if (rep + 1) % 10 == 0:
            logger.info(f"Simulation progress: {rep + 1}/{spec.replications} replications")

    if results:
        estimates = np.array([r['beta'] for r in results])
        errors = estimates - np.array(truths)
        mse_per_coefficient = (errors ** 2).mean(axis=0).tolist()
        mean_estimate = estimates.mean(axis=0).tolist()
        mse = float(np.mean([r['mse'] for r in results]))
        wrong_pct = 100.0 * float(np.mean([r['wrong_convergence'] for r in results]))
        mean_cpu = float(np.mean([r['cpu_seconds'] for r in results]))
    else:
        mse_per_coefficient, mean_estimate = [], []
        mse = wrong_pct = mean_cpu = float('nan')

    summary = SimulationSummary(design=design, spec=spec.model_dump(mode='json'),
                                replications=spec.replications, wrong_pct=wrong_pct, mse=mse,
                                mse_per_coefficient=mse_per_coefficient, mean_estimate=mean_estimate,
                                failures=failures, mean_cpu_seconds=mean_cpu)
    logger.info(f"Simulation done: {design.value}, %wrong={wrong_pct:.1f}, MSE={mse:.4g}, failures={failures}")
    return summary
