"""Degree-2 bivariate polynomial regression by Householder least squares.

The model is

    y = a1*x1 + a2*x2 + a3*x1*x2 + a4*x1**2 + a5*x2**2 + intercept

fitted as a linear model in the five monomials. Coefficients are stored in
that (monomial) order; reports relabel them into the published table order
x1, x2, x1^2, x1x2, x2^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from .dataset import FeaturePair, ModelDataset, Target
from .errors import ConstantTarget, NonFinite, PipelineError, RankDeficient, TooFewRows

MONOMIALS = ("x1", "x2", "x1*x2", "x1^2", "x2^2")
# report column label -> index into the monomial order
TABLE_COLUMNS = (("a_x1", 0), ("a_x2", 1), ("a_x1sq", 3), ("a_x1x2", 2), ("a_x2sq", 4))
MIN_ROWS = 6
RANK_RTOL = 1e-10


class FeatureVector(NamedTuple):
    z1: float  # x1
    z2: float  # x2
    z3: float  # x1*x2
    z4: float  # x1^2
    z5: float  # x2^2


def expand_features(x1: float, x2: float) -> FeatureVector:
    if not (math.isfinite(x1) and math.isfinite(x2)):
        raise NonFinite(f"non-finite regressor ({x1}, {x2})")
    return FeatureVector(x1, x2, x1 * x2, x1 * x1, x2 * x2)


def design_matrix(x1, x2, with_intercept: bool = True) -> np.ndarray:
    """Rows of expanded features; a leading column of ones when ``with_intercept``."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValueError("x1 and x2 must be 1-d arrays of equal length")
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
        raise NonFinite("non-finite regressor")
    cols = [x1, x2, x1 * x2, x1 * x1, x2 * x2]
    if with_intercept:
        cols.insert(0, np.ones_like(x1))
    return np.column_stack(cols)


def column_names(with_intercept: bool = True) -> tuple:
    return (("intercept",) if with_intercept else ()) + MONOMIALS


def r_squared(y, y_hat) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise ValueError("y and y_hat must be 1-d and equal length")
    if y.size < 2:
        raise ValueError("need at least two observations")
    centered = y - y.mean()
    ss_tot = math.fsum(centered * centered)
    if ss_tot == 0:
        raise ConstantTarget("target has zero variance")
    resid = y - y_hat
    return 1.0 - math.fsum(resid * resid) / ss_tot


def _dependent_columns(A: np.ndarray, names: Sequence[str]) -> Optional[list[str]]:
    """Names of columns involved in a (numerical) linear dependency, or None."""
    norms = np.linalg.norm(A, axis=0)
    zero = norms == 0
    if zero.any():
        return [n for n, z in zip(names, zero) if z]
    _, s, vt = np.linalg.svd(A / norms, full_matrices=False)
    small = s < RANK_RTOL * s[0]
    if not small.any():
        return None
    null = vt[small]
    involved = np.any(np.abs(null) > 1e-6, axis=0)
    return [n for n, hit in zip(names, involved) if hit]


def householder_lstsq(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares solution of ``A @ x ~ y`` via Householder QR (A full column rank)."""
    R = np.array(A, dtype=np.float64, copy=True)
    b = np.array(y, dtype=np.float64, copy=True)
    m, n = R.shape
    for j in range(n):
        x = R[j:, j]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            continue
        alpha = -math.copysign(normx, x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        R[j:, j:] -= 2.0 * np.outer(v, v @ R[j:, j:])
        b[j:] -= 2.0 * v * (v @ b[j:])
    coef = np.zeros(n)
    for i in range(n - 1, -1, -1):
        coef[i] = (b[i] - R[i, i + 1:n] @ coef[i + 1:]) / R[i, i]
    return coef


@dataclass(frozen=True)
class RegressionFit:
    coefficients: tuple  # a1..a5 in monomial order
    intercept: float
    r_squared: float
    n_rows: int
    target_name: Optional[Target] = None
    feature_pair: Optional[FeaturePair] = None

    def predict(self, x1, x2) -> np.ndarray:
        return design_matrix(x1, x2, with_intercept=False) @ np.asarray(self.coefficients) + self.intercept

    def table_coefficients(self) -> dict[str, float]:
        return {label: self.coefficients[i] for label, i in TABLE_COLUMNS}


def fit_arrays(x1, x2, y, with_intercept: bool = True, target_name=None,
               feature_pair=None) -> RegressionFit:
    """Fit the degree-2 model to column arrays."""
    A = design_matrix(x1, x2, with_intercept)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.shape[0],):
        raise ValueError("y length does not match regressors")
    if not np.all(np.isfinite(y)):
        raise NonFinite("non-finite target")
    if A.shape[0] < max(MIN_ROWS, A.shape[1]):
        raise TooFewRows(f"{A.shape[0]} rows for {A.shape[1]} parameters (need >= {MIN_ROWS})")
    dependent = _dependent_columns(A, column_names(with_intercept))
    if dependent:
        raise RankDeficient(dependent)
    coef = householder_lstsq(A, y)
    intercept = float(coef[0]) if with_intercept else 0.0
    a = tuple(float(c) for c in (coef[1:] if with_intercept else coef))
    r2 = r_squared(y, A @ coef)
    return RegressionFit(a, intercept, r2, int(A.shape[0]),
                         None if target_name is None else Target(target_name),
                         None if feature_pair is None else FeaturePair(feature_pair))


def fit_least_squares(rows: Iterable[tuple], with_intercept: bool = True,
                      target_name=None, feature_pair=None) -> RegressionFit:
    """Fit from ``(FeatureVector, y)`` pairs; x1 and x2 are read from z1 and z2."""
    rows = list(rows)
    if len(rows) < MIN_ROWS:
        raise TooFewRows(f"{len(rows)} rows (need >= {MIN_ROWS})")
    x1 = [fv[0] for fv, _ in rows]
    x2 = [fv[1] for fv, _ in rows]
    y = [v for _, v in rows]
    return fit_arrays(x1, x2, y, with_intercept, target_name, feature_pair)


def fit_dataset(ds: ModelDataset, with_intercept: bool = True) -> RegressionFit:
    x1, x2 = ds.features()
    return fit_arrays(x1, x2, ds.target, with_intercept, ds.target_name, ds.feature_pair)


@dataclass(frozen=True)
class FitFailure:
    target_name: Target
    feature_pair: FeaturePair
    error: str


Cell = Union[RegressionFit, FitFailure]


@dataclass
class AnalysisReport:
    cells: dict = field(default_factory=dict)  # (Target, FeaturePair) -> Cell

    def cell(self, target, pair) -> Cell:
        return self.cells[(Target(target), FeaturePair(pair))]

    def table(self, pair) -> list[Cell]:
        """Cells of one feature pair in published row order."""
        pair = FeaturePair(pair)
        return [self.cells[(t, pair)] for t in Target if (t, pair) in self.cells]

    @property
    def failures(self) -> list[FitFailure]:
        return [c for c in self.ordered() if isinstance(c, FitFailure)]

    def ordered(self) -> list[Cell]:
        return [c for pair in FeaturePair for c in self.table(pair)]


def run_analysis(datasets: Iterable[ModelDataset],
                 failures: Optional[Mapping[tuple, Exception]] = None) -> AnalysisReport:
    """Fit every dataset; a failing fit becomes a :class:`FitFailure` cell.

    ``failures`` carries datasets that could not be built upstream, keyed by
    (target, feature pair), so the report still has one cell per combination.
    """
    report = AnalysisReport()
    for (t, p), exc in (failures or {}).items():
        t, p = Target(t), FeaturePair(p)
        report.cells[(t, p)] = FitFailure(t, p, f"{type(exc).__name__}: {exc}")
    for ds in datasets:
        key = (ds.target_name, ds.feature_pair)
        try:
            report.cells[key] = fit_dataset(ds)
        except PipelineError as exc:
            report.cells[key] = FitFailure(*key, f"{type(exc).__name__}: {exc}")
    return report


def run_per_country(datasets: Iterable[ModelDataset]) -> dict[str, AnalysisReport]:
    """Separate fits for each region's rows (pooled scaling is kept)."""
    datasets = list(datasets)
    regions = sorted({r.region_id for ds in datasets for r in ds.rows})
    return {rid: run_analysis([ds.subset(rid) for ds in datasets]) for rid in regions}
