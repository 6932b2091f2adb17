"""
Penalized Trimmed Squares: robust regression by penalized deletion of outliers.
"""
from .datagen import (BenchmarkCase, eval_run, gen_barrera_yohai, gen_masked_cluster, gen_mixed_contamination,
                      load_benchmark)
from .errors import PtsError
from .linalg_core import Dataset, ols_fit
from .pts_core import PenaltyVector, PtsSolution, compute_penalties, exact_pts, fast_pts
from .robust_init import lts_fit, mcd_fit, robust_scale
from .schemas import PtsConfig, SimSpec

__all__ = [
    "BenchmarkCase",
    "Dataset",
    "PenaltyVector",
    "PtsConfig",
    "PtsError",
    "PtsSolution",
    "SimSpec",
    "compute_penalties",
    "eval_run",
    "exact_pts",
    "fast_pts",
    "gen_barrera_yohai",
    "gen_masked_cluster",
    "gen_mixed_contamination",
    "load_benchmark",
    "lts_fit",
    "mcd_fit",
    "ols_fit",
    "robust_scale",
]
