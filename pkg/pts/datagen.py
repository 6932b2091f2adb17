"""
Embedded benchmark datasets, contaminated-regression generators and run metrics.
"""
import logging
import math
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from . import config
from .errors import DataError, UnknownName
from .linalg_core import Dataset, SubsetIndex, ols_fit
from .schemas import SimSpec

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"

# name -> 1-based labels of the known outliers
BENCHMARK_OUTLIERS: Dict[str, Tuple[int, ...]] = {
    "telephone": tuple(range(15, 21)),
    "stars": (11, 20, 30, 34),
    "wood": (4, 6, 8, 19),
    "hawkins": tuple(range(1, 11)),
}
BENCHMARK_NAMES = tuple(BENCHMARK_OUTLIERS)


@dataclass
class BenchmarkCase:
    name: str
    dataset: Dataset
    true_outliers: SubsetIndex
    has_intercept: bool = True


@dataclass
class Sample:
    """One generated replication."""
    dataset: Dataset
    beta_true: np.ndarray
    contaminated: SubsetIndex
    contamination_beta: np.ndarray


def read_regression_csv(path: Union[str, Path], add_intercept: bool = True) -> Dataset:
    """
    Read a comma-separated file with a header row; the last column is the response.

    Raises:
        DataError: on unreadable, ragged, empty or non-numeric input (with the 1-based line)
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, skip_blank_lines=True, encoding='utf-8')
    except FileNotFoundError as e:
        raise DataError(f"File not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{path} is empty", line=1) from e
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: {e}", line=_parser_error_line(str(e))) from e
    except UnicodeDecodeError as e:
        raise DataError(f"{path} is not UTF-8 text") from e

    if frame.shape[1] < 2:
        raise DataError(f"{path} needs at least one predictor column and a response column", line=1)
    if frame.shape[0] == 0:
        raise DataError(f"{path} has a header but no data rows", line=2)

    values = frame.apply(lambda column: pd.to_numeric(column.str.strip(), errors='coerce'))
    bad_rows = np.flatnonzero(~np.isfinite(values.to_numpy(dtype=float)).all(axis=1))
    if bad_rows.size:
        row = int(bad_rows[0])
        raise DataError(f"{path}: non-numeric or missing value on line {row + 2}", line=row + 2)

    array = values.to_numpy(dtype=float)
    try:
        return Dataset.from_arrays(array[:, :-1], array[:, -1], add_intercept=add_intercept)
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e


def _parser_error_line(message: str) -> Optional[int]:
    marker = "line "
    if marker not in message:
        return None
    digits = ""
    for ch in message.split(marker, 1)[1]:
        if not ch.isdigit():
            break
        digits += ch
    return int(digits) if digits else None


def load_benchmark(name: str) -> BenchmarkCase:
    """
    Load one of the embedded benchmark datasets (intercept prepended).

    Raises:
        UnknownName: if name is not a known benchmark
    """
    key = name.strip().lower()
    if key not in BENCHMARK_OUTLIERS:
        raise UnknownName(f"Unknown benchmark '{name}'; choose from {', '.join(BENCHMARK_NAMES)}")
    dataset = read_regression_csv(DATA_DIR / f"{key}.csv", add_intercept=True)
    return BenchmarkCase(name=key, dataset=dataset,
                         true_outliers=np.array(BENCHMARK_OUTLIERS[key], dtype=np.intp))


def export_benchmarks(directory: Union[str, Path]) -> List[Path]:
    """Copy the embedded benchmark CSVs (columns x1..x_{p-1}, y) into directory."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name in BENCHMARK_NAMES:
        destination = target / f"{name}.csv"
        shutil.copyfile(DATA_DIR / f"{name}.csv", destination)
        written.append(destination)
    logger.info(f"Exported {len(written)} benchmark datasets to {target}")
    return written


def contaminated_count(spec: SimSpec) -> int:
    """floor(contamination * n), robust to binary rounding of the fraction."""
    return int(math.floor(spec.contamination * spec.n + 1e-9))


def gen_barrera_yohai(spec: SimSpec, rep: int) -> Sample:
    """
    Gaussian regression with beta = 0 plus a cluster of identical high-leverage outliers.

    Clean rows come first: predictors and errors iid normal. The last
    floor(eps * n) rows sit at x = (1, position, 0, ..., 0) with
    y = slope * position.
    """
    if spec.p < 2:
        raise ValueError("The leverage design needs at least one predictor besides the intercept")
    rng = np.random.default_rng([spec.seed, config.STREAM_SIMULATION, rep])
    m = contaminated_count(spec)
    n_clean = spec.n - m

    Z = np.zeros((spec.n, spec.p - 1))
    y = np.empty(spec.n)
    Z[:n_clean] = rng.standard_normal((n_clean, spec.p - 1))
    y[:n_clean] = spec.error_sigma * rng.standard_normal(n_clean)
    Z[n_clean:, 0] = spec.outlier_position
    y[n_clean:] = spec.slope * spec.outlier_position

    contamination_beta = np.zeros(spec.p)
    contamination_beta[1] = spec.slope
    return Sample(dataset=Dataset.from_arrays(Z, y, add_intercept=True),
                  beta_true=np.zeros(spec.p),
                  contaminated=np.arange(n_clean, spec.n, dtype=np.intp),
                  contamination_beta=contamination_beta)


MIXED_N = 50
MIXED_BETA = np.array([0.0, 1.2, -0.8])
MIXED_X_MEANS = (20.0, 30.0)
MIXED_X_SDS = (6.0, 8.0)
MIXED_ERROR_SD = 16.0
MIXED_SHIFT_RANGE = (80.0, 220.0)


def gen_mixed_contamination(seed: int, rep: int, x_outliers: int = 6, good_leverage: int = 4,
                            y_outliers: int = 6) -> Sample:
    """
    Two-predictor sample (n = 50) with bad leverage, good leverage and vertical outliers.

    y = 1.2 x1 - 0.8 x2 + u, x1 ~ N(20, 6^2), x2 ~ N(30, 8^2), u ~ N(0, 16^2).
    Contaminated rows come first, in the order bad leverage, good leverage,
    vertical. A U(80, 220) shift goes to x1 for odd-numbered leverage rows
    and x2 for even-numbered ones; good leverage rows get their response
    recomputed from the model, vertical outliers get the shift added to y.
    """
    total = x_outliers + good_leverage + y_outliers
    if total >= MIXED_N:
        raise ValueError(f"{total} contaminated rows do not fit in a sample of {MIXED_N}")
    rng = np.random.default_rng([seed, config.STREAM_SIMULATION, rep])

    X = np.column_stack([rng.normal(MIXED_X_MEANS[j], MIXED_X_SDS[j], MIXED_N) for j in range(2)])
    u = rng.normal(0.0, MIXED_ERROR_SD, MIXED_N)
    y = MIXED_BETA[0] + X @ MIXED_BETA[1:] + u

    low, high = MIXED_SHIFT_RANGE
    for i in range(x_outliers + good_leverage):
        column = 0 if (i + 1) % 2 == 1 else 1
        X[i, column] += rng.uniform(low, high)
        if i >= x_outliers:
            y[i] = MIXED_BETA[0] + X[i] @ MIXED_BETA[1:] + u[i]
    for i in range(x_outliers + good_leverage, total):
        y[i] += rng.uniform(low, high)

    dataset = Dataset.from_arrays(X, y, add_intercept=True)
    reference = ols_fit(dataset, np.arange(MIXED_N)).beta
    return Sample(dataset=dataset, beta_true=MIXED_BETA.copy(),
                  contaminated=np.arange(total, dtype=np.intp), contamination_beta=reference)


CLUSTER_N = 25
CLUSTER_BETA = np.array([0.0, 1.0, 1.0])
CLUSTER_X_RANGE = (0.0, 15.0)
CLUSTER_CORNER = (18.0, 20.0)


def gen_masked_cluster(seed: int, rep: int, n: int = CLUSTER_N, outliers: int = 3,
                       shift: float = 6.0) -> Sample:
    """
    Synthetic two-predictor sample with a small cluster of masked leverage outliers.

    Clean rows follow y = x1 + x2 + u with x1, x2 ~ U(0, 15) and u ~ N(0, 1).
    The first `outliers` rows sit together at x1, x2 ~ U(18, 20) with their
    response raised by `shift`, so the cluster pulls a least-squares fit
    towards itself and hides its own residuals.
    """
    if not 0 < outliers < n // 2:
        raise ValueError(f"Need 0 < outliers < n/2, got outliers={outliers}, n={n}")
    rng = np.random.default_rng([seed, config.STREAM_SIMULATION, rep])

    X = rng.uniform(*CLUSTER_X_RANGE, size=(n, 2))
    X[:outliers] = rng.uniform(*CLUSTER_CORNER, size=(outliers, 2))
    y = CLUSTER_BETA[0] + X @ CLUSTER_BETA[1:] + rng.standard_normal(n)
    y[:outliers] += shift

    dataset = Dataset.from_arrays(X, y, add_intercept=True)
    reference = ols_fit(dataset, np.arange(n)).beta
    return Sample(dataset=dataset, beta_true=CLUSTER_BETA.copy(),
                  contaminated=np.arange(outliers, dtype=np.intp), contamination_beta=reference)


def eval_run(beta_hat, beta_true, slope: Optional[float] = None,
             contamination_beta: Optional[np.ndarray] = None) -> Dict[str, Union[float, bool]]:
    """
    Squared error of one estimate and whether it converged to the outlier solution.

    The outlier solution is (0, slope, 0, ..., 0) unless contamination_beta is
    given. A fit is wrong only when strictly closer to it than to beta_true.

    Returns:
        {'mse': ..., 'wrong_convergence': ...}
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    if beta_hat.shape != beta_true.shape:
        raise ValueError(f"Shape mismatch: {beta_hat.shape} vs {beta_true.shape}")
    if contamination_beta is None:
        if slope is None:
            raise ValueError("Either slope or contamination_beta is required")
        contamination_beta = np.zeros_like(beta_true)
        contamination_beta[min(1, len(beta_true) - 1)] = slope

    mse = float(np.sum((beta_hat - beta_true) ** 2))
    to_truth = float(np.linalg.norm(beta_hat - beta_true))
    to_outliers = float(np.linalg.norm(beta_hat - np.asarray(contamination_beta, dtype=float)))
    return {'mse': mse, 'wrong_convergence': to_outliers < to_truth}


def _slope_grid() -> List[float]:
    return [round(0.9 + 0.1 * i, 1) for i in range(12)]


TABLE_SLOPE_SWEEP: List[SimSpec] = [
    SimSpec(n=400, p=36, contamination=0.1, slope=slope, replications=150) for slope in _slope_grid()
]

_SIZE_GRID = ((100, 2), (100, 3), (100, 5), (500, 5), (500, 10), (500, 20), (1000, 5), (1000, 10), (1000, 20))

TABLE_LIGHT: List[SimSpec] = [
    SimSpec(n=n, p=p, contamination=0.1, slope=1.0, replications=500) for n, p in _SIZE_GRID
]

TABLE_HEAVY: List[SimSpec] = [
    SimSpec(n=n, p=p, contamination=0.2, slope=2.2, replications=500) for n, p in _SIZE_GRID
]

MIXED_GOOD_AND_BAD = SimSpec(n=MIXED_N, p=3, contamination=0.32, x_outliers=6, good_leverage=4,
                             y_outliers=6, replications=150)
MIXED_BAD_ONLY = SimSpec(n=MIXED_N, p=3, contamination=0.32, x_outliers=10, good_leverage=0,
                         y_outliers=6, replications=150)

# LTS coverage used for the scale in the mixed design
MIXED_LTS_COVERAGE = 28
