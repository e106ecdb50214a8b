"""
Correlation metrics against MOS: SRCC, PLCC and PLCC after a 4-parameter logistic
mapping of the predictions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.optimize import minimize
from scipy.special import expit

from tools.errors import DegenerateInputError, InvalidInputError, UndefinedCorrelationError


def _vector(values: Sequence[float], what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise InvalidInputError(f"{what} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} contains NaN or infinite values")
    return arr


def _pair(x: Sequence[float], y: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    a, b = _vector(x, "x"), _vector(y, "y")
    if a.size != b.size:
        raise InvalidInputError(f"length mismatch: {a.size} vs {b.size}")
    for arr, side in ((a, "x"), (b, "y")):
        if np.all(arr == arr[0]):
            raise UndefinedCorrelationError(f"correlation is undefined: {side} is constant")
    if a.size < 3:
        raise InvalidInputError(f"correlation needs at least 3 pairs, got {a.size}")
    return a, b


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    r, _ = stats.pearsonr(a, b)
    return float(r)


def rank_with_ties(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, tied values share the average of their span"""
    return stats.rankdata(_vector(values, "values"), method="average")


def srcc(x: Sequence[float], y: Sequence[float]) -> float:
    a, b = _pair(x, y)
    return _pearson(rank_with_ties(a), rank_with_ties(b))


def plcc(x: Sequence[float], y: Sequence[float]) -> float:
    a, b = _pair(x, y)
    return _pearson(a, b)


def logistic(x: np.ndarray, beta1: float, beta2: float, beta3: float, beta4: float) -> np.ndarray:
    return beta2 + (beta1 - beta2) * expit((np.asarray(x, dtype=float) - beta3) / abs(beta4))


@dataclass(frozen=True)
class LogisticParams:
    beta1: float
    beta2: float
    beta3: float
    beta4: float
    sse: float = float("nan")
    iterations: int = 0
    converged: bool = True

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        return logistic(np.asarray(x, dtype=float), self.beta1, self.beta2, self.beta3, self.beta4)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.beta1, self.beta2, self.beta3, self.beta4


def _sse(beta: np.ndarray, pred: np.ndarray, mos: np.ndarray) -> float:
    if beta[3] == 0 or not np.all(np.isfinite(beta)):
        return float("inf")
    r = logistic(pred, *beta) - mos
    return float(r @ r)


def _refit_amplitudes(beta: np.ndarray, pred: np.ndarray, mos: np.ndarray) -> np.ndarray:
    # f = beta1 * u + beta2 * (1 - u) is linear in (beta1, beta2) once beta3, beta4 are fixed
    u = expit((pred - beta[2]) / abs(beta[3]))
    design = np.column_stack((u, 1.0 - u))
    (b1, b2), *_ = np.linalg.lstsq(design, mos, rcond=None)
    return np.array([b1, b2, beta[2], beta[3]])


def fit_logistic(
        pred: Sequence[float],
        mos: Sequence[float],
        max_iter: int = 2000,
        xatol: float = 1e-8,
) -> LogisticParams:
    """Least-squares fit of the monotone logistic by Nelder-Mead from a fixed start"""
    x, y = _vector(pred, "pred"), _vector(mos, "mos")
    if x.size != y.size:
        raise InvalidInputError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 5:
        raise InvalidInputError(f"logistic fit needs at least 5 points, got {x.size}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInputError("logistic fit needs nonconstant predictions and MOS")

    start = np.array([y.max(), y.min(), x.mean(), x.std()])
    res = minimize(
        _sse,
        start,
        args=(x, y),
        method="Nelder-Mead",
        options={"maxiter": max_iter, "xatol": xatol, "fatol": 1e-14},
    )
    beta = np.asarray(res.x, dtype=float)
    best = _sse(beta, x, y)
    polished = _refit_amplitudes(beta, x, y)
    polished_sse = _sse(polished, x, y)
    if polished_sse <= best:
        beta, best = polished, polished_sse

    return LogisticParams(
        beta1=float(beta[0]),
        beta2=float(beta[1]),
        beta3=float(beta[2]),
        beta4=float(beta[3]),
        sse=best,
        iterations=int(res.nit),
        converged=bool(res.success),
    )


def plcc_after_logistic(pred: Sequence[float], mos: Sequence[float]) -> float:
    """PLCC between the logistic-mapped predictions and MOS.

    The affine map is the wide-slope limit of the logistic family; when the fitted
    curve does not beat it in squared error, the affine limit is used instead, which
    gives |plcc(pred, mos)|. Both branches fit an increasing map, so a decreasing
    relation between predictions and MOS is reported with a positive sign; use
    plcc() when the direction matters.
    """
    x, y = _pair(pred, mos)
    params = fit_logistic(x, y)
    slope, intercept = np.polyfit(x, y, 1)
    affine = slope * x + intercept - y
    if params.sse < float(affine @ affine):
        mapped = params(x)
        if not np.all(mapped == mapped[0]):
            return plcc(mapped, y)
    return abs(plcc(x, y))


def median_of(values: Sequence[float]) -> float:
    return float(np.median(_vector(values, "values")))
