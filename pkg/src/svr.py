"""
Epsilon-SVR with an RBF kernel, trained by SMO, plus cross-validated grid search.

The dual is solved in the usual 2l-variable form: variable t < l is alpha_t (label +1,
linear term eps - y_t), variable t >= l is alpha*_t (label -1, linear term eps + y_t).
Working pairs are the maximal violating pair, ties resolved by the lowest index.
Features are always standardized inside training and the scaler is stored on the model.
"""

from __future__ import annotations

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

import tools.pooling_config as cfg
from tools.errors import DimensionError, InvalidInputError, InvalidParameterError
from tools.tp_console import tp_print

_FULL_KERNEL_LIMIT = 3000
_COLUMN_CACHE_SIZE = 512
_TAU = 1e-12


def as_matrix(X, what: str = "X") -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidInputError(f"{what} must be a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} contains NaN or infinite values")
    return arr


@dataclass(frozen=True, eq=False)
class FeatureScaler:
    means: np.ndarray
    stds: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.means.size)


def scaler_fit(X) -> FeatureScaler:
    arr = as_matrix(X)
    if arr.shape[0] < 1:
        raise InvalidInputError("scaler needs at least one row")
    return FeatureScaler(means=arr.mean(axis=0), stds=arr.std(axis=0))


def scaler_apply(scaler: FeatureScaler, X) -> np.ndarray:
    arr = as_matrix(X)
    if arr.shape[1] != scaler.dimension:
        raise DimensionError(f"expected {scaler.dimension} features, got {arr.shape[1]}")
    # zero-variance columns collapse to 0
    inv = np.divide(1.0, scaler.stds, out=np.zeros_like(scaler.stds), where=scaler.stds > 0)
    return (arr - scaler.means) * inv


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


class _RbfColumns:
    """Kernel columns, precomputed for small problems, LRU-cached otherwise"""

    def __init__(self, X: np.ndarray, gamma: float):
        self.X = X
        self.gamma = gamma
        self._full = rbf_kernel(X, X, gamma) if X.shape[0] <= _FULL_KERNEL_LIMIT else None
        self._cache: "OrderedDict[int, np.ndarray]" = OrderedDict()

    def column(self, a: int) -> np.ndarray:
        if self._full is not None:
            return self._full[:, a]
        col = self._cache.get(a)
        if col is None:
            col = rbf_kernel(self.X, self.X[a : a + 1], self.gamma)[:, 0]
            self._cache[a] = col
            if len(self._cache) > _COLUMN_CACHE_SIZE:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(a)
        return col


@dataclass(frozen=True, eq=False)
class DualSolution:
    alpha: np.ndarray
    alpha_star: np.ndarray
    rho: float
    objective: float
    iterations: int
    converged: bool

    @property
    def coefficients(self) -> np.ndarray:
        return self.alpha - self.alpha_star


def _rho(F: np.ndarray, beta: np.ndarray, C: float) -> float:
    l2 = beta.size
    y = np.concatenate((np.ones(l2 // 2), -np.ones(l2 // 2)))
    yG = -F
    at_upper = beta >= C
    at_lower = beta <= 0
    free = ~at_upper & ~at_lower
    if np.any(free):
        return float(np.mean(yG[free]))
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = float(np.min(yG[ub_mask])) if np.any(ub_mask) else np.inf
    lb = float(np.max(yG[lb_mask])) if np.any(lb_mask) else -np.inf
    return (ub + lb) / 2.0


def solve_svr_dual(
        X: np.ndarray,
        y: np.ndarray,
        C: float,
        gamma: float,
        epsilon: float,
        tol: float = 1e-3,
        max_iter: int = 10000,
) -> DualSolution:
    """SMO on already standardized rows X"""
    l = y.size
    kernel = _RbfColumns(X, gamma)
    alpha = np.zeros(l)
    alpha_star = np.zeros(l)
    s = np.zeros(l)  # K @ (alpha - alpha_star)

    converged = False
    iterations = 0
    F = np.concatenate((y - epsilon, y + epsilon))
    while True:
        base = y - s
        F = np.concatenate((base - epsilon, base + epsilon))
        up = np.concatenate((alpha < C, alpha_star > 0))
        low = np.concatenate((alpha > 0, alpha_star < C))
        i = int(np.argmax(np.where(up, F, -np.inf)))
        j = int(np.argmin(np.where(low, F, np.inf)))
        gap = F[i] - F[j]
        if gap < tol:
            converged = True
            break
        if iterations >= max_iter:
            break

        a, b = i % l, j % l
        Ka = kernel.column(a)
        Kb = kernel.column(b)
        eta = max(Ka[a] + Kb[b] - 2.0 * Ka[b], _TAU)
        bound_i = C - alpha[a] if i < l else alpha_star[a]
        bound_j = alpha[b] if j < l else C - alpha_star[b]
        lam = min(gap / eta, bound_i, bound_j)

        if i < l:
            alpha[a] = C if lam == bound_i else alpha[a] + lam
        else:
            alpha_star[a] = 0.0 if lam == bound_i else alpha_star[a] - lam
        if j < l:
            alpha[b] = 0.0 if lam == bound_j else alpha[b] - lam
        else:
            alpha_star[b] = C if lam == bound_j else alpha_star[b] + lam
        if a != b:
            s += lam * (Ka - Kb)
        iterations += 1

    beta = np.concatenate((alpha, alpha_star))
    c = alpha - alpha_star
    objective = 0.5 * float(c @ s) + epsilon * float(np.sum(beta)) - float(y @ c)
    return DualSolution(
        alpha=alpha,
        alpha_star=alpha_star,
        rho=_rho(F, beta, C),
        objective=objective,
        iterations=iterations,
        converged=converged,
    )


@dataclass(frozen=True, eq=False)
class SvrModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    gamma: float
    scaler: FeatureScaler
    C: float
    epsilon: float
    converged: bool = True
    iterations: int = 0

    @property
    def dimension(self) -> int:
        return self.scaler.dimension


def svr_train(
        X,
        y: Sequence[float],
        C: float,
        gamma: float,
        epsilon: float = cfg.SVR_EPSILON,
        tol: float = cfg.SVR_TOL,
        max_iter: int = cfg.SVR_MAX_ITER,
) -> SvrModel:
    Xm = as_matrix(X)
    target = np.asarray(y, dtype=float).reshape(-1)
    if target.size < 1:
        raise InvalidInputError("SVR training needs at least one sample")
    if Xm.shape[0] != target.size:
        raise DimensionError(f"{Xm.shape[0]} feature rows but {target.size} targets")
    if not np.all(np.isfinite(target)):
        raise InvalidInputError("targets contain NaN or infinite values")
    if not (C > 0 and gamma > 0 and epsilon >= 0):
        raise InvalidParameterError(f"need C > 0, gamma > 0, epsilon >= 0 (got {C}, {gamma}, {epsilon})")

    scaler = scaler_fit(Xm)
    Xs = scaler_apply(scaler, Xm)
    dual = solve_svr_dual(Xs, target, C, gamma, epsilon, tol=tol, max_iter=max_iter)
    if not dual.converged:
        tp_print.warning(
            f"SVR (C={C}, gamma={gamma}) stopped at the iteration cap {max_iter} before reaching tolerance {tol}"
        )

    coef = dual.coefficients
    sv = np.flatnonzero(coef != 0)
    return SvrModel(
        support_vectors=Xs[sv].copy(),
        dual_coefficients=coef[sv].copy(),
        bias=-dual.rho,
        gamma=float(gamma),
        scaler=scaler,
        C=float(C),
        epsilon=float(epsilon),
        converged=dual.converged,
        iterations=dual.iterations,
    )


def svr_predict_many(model: SvrModel, X) -> np.ndarray:
    Xs = scaler_apply(model.scaler, X)
    if model.dual_coefficients.size == 0:
        return np.full(Xs.shape[0], model.bias)
    return rbf_kernel(Xs, model.support_vectors, model.gamma) @ model.dual_coefficients + model.bias


def svr_predict(model: SvrModel, x: Sequence[float]) -> float:
    row = np.asarray(x, dtype=float).reshape(1, -1)
    return float(svr_predict_many(model, row)[0])


@dataclass(frozen=True)
class GridSearchPlan:
    c_values: Tuple[float, ...]
    gamma_values: Tuple[float, ...]
    folds: int = 5

    def __post_init__(self):
        object.__setattr__(self, "c_values", tuple(float(c) for c in self.c_values))
        object.__setattr__(self, "gamma_values", tuple(float(g) for g in self.gamma_values))
        if len(self.c_values) != 3 or len(self.gamma_values) != 3:
            raise InvalidParameterError("grid search plan needs exactly 3 C values and 3 gamma values")
        if min(self.c_values) <= 0 or min(self.gamma_values) <= 0:
            raise InvalidParameterError("grid values must be positive")
        if self.folds < 2:
            raise InvalidParameterError(f"need at least 2 folds, got {self.folds}")

    @classmethod
    def for_dimension(
            cls,
            dimension: int,
            c_values: Sequence[float] = cfg.GRID_C_VALUES,
            gamma_multipliers: Sequence[float] = cfg.GRID_GAMMA_MULTIPLIERS,
            folds: int = cfg.GRID_FOLDS,
    ) -> "GridSearchPlan":
        return cls(tuple(c_values), tuple(m / dimension for m in gamma_multipliers), folds)

    def candidates(self) -> List[Tuple[float, float]]:
        """(C, gamma) pairs ordered by C then gamma, which is the tie-break order"""
        return sorted(product(set(self.c_values), set(self.gamma_values)))


def kfold_indices(n: int, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    if folds < 2 or folds > n:
        raise InvalidParameterError(f"cannot split {n} samples into {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(perm, folds)
    out = []
    for k, validate in enumerate(parts):
        train = np.concatenate([p for m, p in enumerate(parts) if m != k])
        out.append((np.sort(train), np.sort(validate)))
    return out


def grid_search_scores(
        X,
        y: Sequence[float],
        plan: GridSearchPlan,
        seed: int,
        epsilon: float = cfg.SVR_EPSILON,
        tol: float = cfg.SVR_TOL,
        max_iter: int = cfg.SVR_MAX_ITER,
        workers: int = 1,
) -> Dict[Tuple[float, float], float]:
    """Mean validation RMSE over the folds for every (C, gamma) candidate"""
    Xm = as_matrix(X)
    target = np.asarray(y, dtype=float).reshape(-1)
    folds = kfold_indices(target.size, plan.folds, seed)

    def evaluate(pair: Tuple[float, float]) -> float:
        C, gamma = pair
        errors = []
        for train, validate in folds:
            model = svr_train(Xm[train], target[train], C, gamma, epsilon, tol, max_iter)
            residual = svr_predict_many(model, Xm[validate]) - target[validate]
            errors.append(np.sqrt(np.mean(residual ** 2)))
        return float(np.mean(errors))

    candidates = plan.candidates()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(evaluate, candidates))
    else:
        scores = [evaluate(pair) for pair in candidates]
    return dict(zip(candidates, scores))


def grid_search_train(
        X,
        y: Sequence[float],
        plan: Optional[GridSearchPlan],
        seed: int,
        epsilon: float = cfg.SVR_EPSILON,
        tol: float = cfg.SVR_TOL,
        max_iter: int = cfg.SVR_MAX_ITER,
        workers: int = 1,
) -> SvrModel:
    Xm = as_matrix(X)
    target = np.asarray(y, dtype=float).reshape(-1)
    if Xm.shape[0] != target.size:
        raise DimensionError(f"{Xm.shape[0]} feature rows but {target.size} targets")
    plan = plan or GridSearchPlan.for_dimension(Xm.shape[1])
    if target.size < 2:
        # nothing to validate on
        C, gamma = plan.candidates()[0]
        return svr_train(Xm, target, C, gamma, epsilon, tol, max_iter)
    if plan.folds > target.size:
        plan = replace(plan, folds=target.size)
    scores = grid_search_scores(Xm, target, plan, seed, epsilon, tol, max_iter, workers)

    best_pair, best_rmse = None, np.inf
    for pair in plan.candidates():
        if scores[pair] < best_rmse:
            best_pair, best_rmse = pair, scores[pair]
    if best_pair is None:
        best_pair = plan.candidates()[0]
    return svr_train(Xm, target, best_pair[0], best_pair[1], epsilon, tol, max_iter)
