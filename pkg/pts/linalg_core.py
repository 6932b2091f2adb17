"""
Dense least-squares kernel: OLS on observation subsets, leverages and adjusted residuals.

All fits go through a column-pivoted QR factorization of the subset design,
X_S P = Q R, which also provides the rank check. Residuals are always returned
for all n observations.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import qr, solve_triangular

from . import config
from .errors import RankDeficient

logger = logging.getLogger(__name__)

# Sorted array of distinct observation indices in [0, n)
SubsetIndex = np.ndarray


def as_subset(indices: Iterable[int], n: int) -> SubsetIndex:
    """Normalize indices to a strictly increasing int array within [0, n)."""
    if not isinstance(indices, np.ndarray):
        indices = list(indices)
    subset = np.unique(np.asarray(indices, dtype=np.intp))
    if subset.size and (subset[0] < 0 or subset[-1] >= n):
        raise IndexError(f"Subset indices must lie in [0, {n}); got range [{subset[0]}, {subset[-1]}]")
    return subset


def complement(subset: SubsetIndex, n: int) -> SubsetIndex:
    """Indices of [0, n) not in subset."""
    mask = np.ones(n, dtype=bool)
    mask[subset] = False
    return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observation matrix X (n x p), response y and optional row labels."""
    X: np.ndarray
    y: np.ndarray
    names: Optional[Tuple[str, ...]] = None
    has_intercept: bool = False

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError(f"X must be two-dimensional, got shape {X.shape}")
        n, p = X.shape
        if y.shape[0] != n:
            raise ValueError(f"X has {n} rows but y has {y.shape[0]} entries")
        if p < 1 or n < p:
            raise ValueError(f"Need n >= p >= 1, got n={n}, p={p}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("X and y must be finite")
        if self.names is not None and len(self.names) != n:
            raise ValueError(f"Expected {n} row names, got {len(self.names)}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'y', y)
        if self.names is not None:
            object.__setattr__(self, 'names', tuple(str(name) for name in self.names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_arrays(cls, predictors, y, names: Optional[Sequence[str]] = None,
                    add_intercept: bool = True) -> "Dataset":
        """Build a dataset, optionally prepending a constant column."""
        Z = np.asarray(predictors, dtype=float)
        if Z.ndim == 1:
            Z = Z.reshape(-1, 1)
        if add_intercept:
            Z = np.column_stack([np.ones(Z.shape[0]), Z])
        return cls(Z, y, tuple(names) if names is not None else None, add_intercept)

    def with_response(self, y) -> "Dataset":
        """Same design with a different response vector."""
        return Dataset(self.X, y, self.names, self.has_intercept)

    def labels(self) -> List[str]:
        """Human-facing 1-based row labels."""
        if self.names is not None:
            return list(self.names)
        return [str(i + 1) for i in range(self.n)]


@dataclass
class RegressionFit:
    """OLS fit on a subset; residuals cover all n observations."""
    beta: np.ndarray
    residuals: np.ndarray
    subset: SubsetIndex
    rss: float
    leverages: Optional[np.ndarray] = None


@dataclass
class SubsetFactor:
    """Pivoted QR factor R, permutation piv and OLS coefficients of X_S."""
    subset: SubsetIndex
    R: np.ndarray
    piv: np.ndarray
    beta: np.ndarray
    _gram_inverse: Optional[np.ndarray] = field(default=None, repr=False)

    def hat_values(self, X: np.ndarray) -> np.ndarray:
        """x_i' (X_S' X_S)^-1 x_i for every row of X."""
        W = solve_triangular(self.R, X[:, self.piv].T, trans='T', check_finite=False)
        return np.einsum('ij,ij->j', W, W)

    def gram_inverse(self) -> np.ndarray:
        """(X_S' X_S)^-1 in the original column order."""
        if self._gram_inverse is None:
            p = self.R.shape[0]
            R_inv = solve_triangular(self.R, np.eye(p), check_finite=False)
            G = np.empty((p, p))
            G[np.ix_(self.piv, self.piv)] = R_inv @ R_inv.T
            self._gram_inverse = G
        return self._gram_inverse


def _pivoted_qr(X_S: np.ndarray):
    """Return (Q, R, piv) or None when X_S is rank deficient."""
    m, p = X_S.shape
    if m < p:
        return None
    Q, R, piv = qr(X_S, mode='economic', pivoting=True, check_finite=False)
    r_diag = np.abs(np.diag(R))
    if r_diag[0] == 0.0 or r_diag[-1] < config.RANK_TOL * r_diag[0]:
        return None
    return Q, R, piv


def factorize(data: Dataset, subset: SubsetIndex) -> SubsetFactor:
    """
    Factorize the subset design and solve for its OLS coefficients.

    Raises:
        RankDeficient: if the subset has fewer than p rows or rank < p
    """
    X_S = data.X[subset]
    factors = _pivoted_qr(X_S)
    if factors is None:
        raise RankDeficient(f"Subset of {len(subset)} rows does not have full column rank {data.p}")
    Q, R, piv = factors
    z = solve_triangular(R, Q.T @ data.y[subset], check_finite=False)
    beta = np.empty(data.p)
    beta[piv] = z
    return SubsetFactor(subset=subset, R=R, piv=piv, beta=beta)


def ols_fit(data: Dataset, subset: SubsetIndex, with_leverages: bool = False) -> RegressionFit:
    """
    Ordinary least squares on the rows in subset.

    Args:
        data: Dataset
        subset: Observation indices used for the fit
        with_leverages: Also compute h_i for all n rows relative to the subset

    Returns:
        RegressionFit with residuals for all n rows

    Raises:
        RankDeficient: if X restricted to subset has rank < p
    """
    subset = as_subset(subset, data.n)
    factor = factorize(data, subset)
    residuals = data.y - data.X @ factor.beta
    rss = float(np.dot(residuals[subset], residuals[subset]))
    leverages = factor.hat_values(data.X) if with_leverages else None
    return RegressionFit(beta=factor.beta, residuals=residuals, subset=subset, rss=rss,
                         leverages=leverages)


def hat_values(data: Dataset, subset: SubsetIndex) -> np.ndarray:
    """Leverages of all n rows with the Gram matrix formed from the subset rows.

    Rows outside the subset are not capped and may exceed 1.
    """
    return factorize(data, as_subset(subset, data.n)).hat_values(data.X)


def leverage(data: Dataset, subset: SubsetIndex, i: int) -> float:
    """h_i = x_i' (X_S' X_S)^-1 x_i."""
    factor = factorize(data, as_subset(subset, data.n))
    return float(factor.hat_values(data.X[i:i + 1])[0])


def adjusted_residuals(fit: RegressionFit, leverages: np.ndarray) -> np.ndarray:
    """
    Adjusted residuals r_i / sqrt(1 - h_i).

    Positions with h_i >= 1 are undefined and returned as NaN.
    """
    h = np.asarray(leverages, dtype=float)
    defined = h < 1.0
    adjusted = np.full(fit.residuals.shape, np.nan)
    adjusted[defined] = fit.residuals[defined] / np.sqrt(1.0 - h[defined])
    return adjusted


def subset_rss(X: np.ndarray, y: np.ndarray, subset: SubsetIndex) -> Optional[float]:
    """RSS of the OLS fit on subset, or None when the subset is rank deficient.

    Lightweight path for enumeration loops; no residual vector is materialized.
    """
    factors = _pivoted_qr(X[subset])
    if factors is None:
        return None
    Q, R, piv = factors
    X_S = X[subset]
    y_S = y[subset]
    z = solve_triangular(R, Q.T @ y_S, check_finite=False)
    residuals = y_S - X_S[:, piv] @ z
    return float(np.dot(residuals, residuals))
