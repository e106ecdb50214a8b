"""
Temporal pooling of frame-level quality scores.

A pooler collapses the per-frame predictions q_1..q_N of one video into a single
video-level quality Q. Every function here is pure: no shared state, inputs are never
modified, and identical inputs give bit-identical outputs, so the poolers can be called
from any number of threads.

Indices are 0-based throughout (frame n of the formulas is element n-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import Callable, Dict, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from tools.errors import InvalidInputError, InvalidParameterError, PoolingDomainError


@dataclass(frozen=True, eq=False)
class FrameScoreSeries:
    """Ordered frame-level quality scores of one video, read-only"""

    scores: np.ndarray

    def __post_init__(self):
        arr = np.array(self.scores, dtype=float)
        if arr.ndim != 1:
            raise InvalidInputError(f"frame scores must be one-dimensional, got shape {arr.shape}")
        if arr.size == 0:
            raise InvalidInputError("frame score series is empty")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("frame score series contains NaN or infinite values")
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)

    def __len__(self) -> int:
        return int(self.scores.size)

    def reversed(self) -> "FrameScoreSeries":
        return FrameScoreSeries(self.scores[::-1])


SeriesLike = Union[FrameScoreSeries, Sequence[float], np.ndarray]


def as_series(values: SeriesLike) -> FrameScoreSeries:
    if isinstance(values, FrameScoreSeries):
        return values
    return FrameScoreSeries(np.asarray(values, dtype=float))


class PoolingMethod(str, Enum):
    MEAN = "mean"
    MEDIAN = "median"
    HARMONIC = "harmonic"
    GEOMETRIC = "geometric"
    MINKOWSKI = "minkowski"
    PERCENTILE = "percentile"
    VQPOOLING = "vqpooling"
    VARIATION = "variation"
    PRIMACY = "primacy"
    RECENCY = "recency"
    HYSTERESIS = "hysteresis"


DISPLAY_NAMES = {
    PoolingMethod.MEAN: "Mean",
    PoolingMethod.MEDIAN: "Median",
    PoolingMethod.HARMONIC: "Harmonic",
    PoolingMethod.GEOMETRIC: "Geometric",
    PoolingMethod.MINKOWSKI: "Minkowski",
    PoolingMethod.PERCENTILE: "Percentile",
    PoolingMethod.VQPOOLING: "VQPooling",
    PoolingMethod.VARIATION: "Variation",
    PoolingMethod.PRIMACY: "Primacy",
    PoolingMethod.RECENCY: "Recency",
    PoolingMethod.HYSTERESIS: "Hysteresis",
}

# parameters each method reads from a PoolingSpec
METHOD_PARAMS: Dict[PoolingMethod, Tuple[str, ...]] = {
    PoolingMethod.MEAN: (),
    PoolingMethod.MEDIAN: (),
    PoolingMethod.HARMONIC: (),
    PoolingMethod.GEOMETRIC: (),
    PoolingMethod.MINKOWSKI: ("p",),
    PoolingMethod.PERCENTILE: ("k_percent", "higher_is_better"),
    PoolingMethod.VQPOOLING: (),
    PoolingMethod.VARIATION: ("k_percent", "negate"),
    PoolingMethod.PRIMACY: ("L", "alpha_p"),
    PoolingMethod.RECENCY: ("L", "alpha_r"),
    PoolingMethod.HYSTERESIS: ("tau", "alpha"),
}


def parse_method(name: Union[str, PoolingMethod]) -> PoolingMethod:
    if isinstance(name, PoolingMethod):
        return name
    key = (name or "").strip().lower()
    try:
        return PoolingMethod(key)
    except ValueError:
        valid = ", ".join(m.value for m in PoolingMethod)
        raise InvalidParameterError(f"unknown pooling method {name!r} (expected one of: {valid})") from None


def _check_k(k_percent: float) -> None:
    if not (0.0 < k_percent <= 100.0):
        raise InvalidParameterError(f"k_percent must lie in (0, 100], got {k_percent}")


def _check_horizon(L: int, decay: float) -> None:
    if int(L) != L or L < 1:
        raise InvalidParameterError(f"L must be a positive integer, got {L}")
    if not (decay >= 0.0 and math.isfinite(decay)):
        raise InvalidParameterError(f"decay rate must be a nonnegative real, got {decay}")


def _check_hysteresis(tau: int, alpha: float) -> None:
    if int(tau) != tau or tau < 1:
        raise InvalidParameterError(f"tau must be a positive integer, got {tau}")
    if not (0.0 <= alpha <= 1.0):
        raise InvalidParameterError(f"alpha must lie in [0, 1], got {alpha}")


@dataclass(frozen=True)
class PoolingSpec:
    """A pooling method plus its parameters; defaults are the standard evaluation settings"""

    method: PoolingMethod
    p: float = 2.0
    k_percent: float = 10.0
    L: int = 180
    alpha_p: float = 0.01
    alpha_r: float = 0.01
    tau: int = 60
    alpha: float = 0.8
    higher_is_better: bool = True
    negate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", parse_method(self.method))
        self.validate()

    def validate(self) -> None:
        m = self.method
        if m == PoolingMethod.MINKOWSKI and (self.p == 0 or not math.isfinite(self.p)):
            raise InvalidParameterError(f"Minkowski exponent must be finite and nonzero, got {self.p}")
        if m in (PoolingMethod.PERCENTILE, PoolingMethod.VARIATION):
            _check_k(self.k_percent)
        if m == PoolingMethod.PRIMACY:
            _check_horizon(self.L, self.alpha_p)
        if m == PoolingMethod.RECENCY:
            _check_horizon(self.L, self.alpha_r)
        if m == PoolingMethod.HYSTERESIS:
            _check_hysteresis(self.tau, self.alpha)
        if self.negate and m != PoolingMethod.VARIATION:
            raise InvalidParameterError("negate is only supported for Variation pooling")

    def params(self) -> Dict[str, object]:
        return {name: getattr(self, name) for name in METHOD_PARAMS[self.method]}

    @property
    def label(self) -> str:
        defaults = {f.name: f.default for f in fields(PoolingSpec)}
        changed = [f"{k}={v}" for k, v in self.params().items() if v != defaults[k]]
        name = DISPLAY_NAMES[self.method]
        return f"{name}({','.join(changed)})" if changed else name


def _require_positive(q: np.ndarray, what: str) -> None:
    if np.any(q <= 0):
        raise PoolingDomainError(
            f"{what} pooling needs strictly positive scores (min {float(q.min())}); "
            "rescale the scores to a positive range first"
        )


def _worst_count(k_percent: float, n: int) -> int:
    _check_k(k_percent)
    # rounding guards products like 0.1 * 30 against landing just above an integer
    count = math.ceil(round(k_percent * n / 100.0, 9))
    return max(1, min(n, count))


def pool_mean(series: SeriesLike) -> float:
    q = as_series(series).scores
    return float(np.mean(q))


def pool_median(series: SeriesLike) -> float:
    q = as_series(series).scores
    return float(np.median(q))


def pool_harmonic(series: SeriesLike) -> float:
    q = as_series(series).scores
    _require_positive(q, "Harmonic")
    return float(q.size / np.sum(1.0 / q))


def pool_geometric(series: SeriesLike) -> float:
    q = as_series(series).scores
    _require_positive(q, "Geometric")
    return float(np.exp(np.mean(np.log(q))))


def pool_minkowski(series: SeriesLike, p: float = 2.0) -> float:
    q = as_series(series).scores
    if p == 0 or not math.isfinite(p):
        raise InvalidParameterError(f"Minkowski exponent must be finite and nonzero, got {p}")
    if not float(p).is_integer() or p < 0:
        _require_positive(q, "Minkowski")
    m = float(np.mean(q ** p))
    if m < 0:
        # odd integral p over mostly negative scores
        return -((-m) ** (1.0 / p))
    return m ** (1.0 / p)


def pool_percentile(series: SeriesLike, k_percent: float = 10.0, higher_is_better: bool = True) -> float:
    """Mean of the worst k% of frames; ties go to the earlier frame"""
    q = as_series(series).scores
    count = _worst_count(k_percent, q.size)
    key = q if higher_is_better else -q
    order = np.argsort(key, kind="stable")
    return float(np.mean(q[order[:count]]))


@dataclass(frozen=True, eq=False)
class ClusterSplit:
    low_group: np.ndarray
    high_group: np.ndarray
    low_mean: float
    high_mean: float
    degenerate: bool = False
    iterations: int = 0


def kmeans_1d_two(series: SeriesLike, max_iter: int = 100) -> ClusterSplit:
    """Two-cluster Lloyd iterations on scalar scores, seeded at (min, max)"""
    q = as_series(series).scores
    if q.size < 2:
        raise InvalidInputError("k-means split needs at least two frames")
    lo, hi = float(q.min()), float(q.max())
    if lo == hi:
        return ClusterSplit(np.arange(q.size), np.array([], dtype=int), lo, lo, degenerate=True)

    c_low, c_high = lo, hi
    assign = None
    it = 0
    for it in range(1, max_iter + 1):
        # equidistant scores join the low cluster
        high = np.abs(q - c_high) < np.abs(q - c_low)
        if assign is not None and np.array_equal(high, assign):
            break
        assign = high
        c_low = float(np.mean(q[~high]))
        c_high = float(np.mean(q[high]))

    return ClusterSplit(
        low_group=np.flatnonzero(~assign),
        high_group=np.flatnonzero(assign),
        low_mean=c_low,
        high_mean=c_high,
        iterations=it,
    )


def pool_vqpooling(series: SeriesLike) -> float:
    q = as_series(series).scores
    if q.size == 1 or q.min() == q.max():
        return float(q[0])
    split = kmeans_1d_two(q)
    if split.high_mean == 0:
        raise PoolingDomainError("VQPooling is undefined when the high-quality cluster mean is 0")
    w = (1.0 - split.low_mean / split.high_mean) ** 2
    num = np.sum(q[split.low_group]) + w * np.sum(q[split.high_group])
    den = split.low_group.size + w * split.high_group.size
    return float(num / den)


def pool_variation(series: SeriesLike, k_percent: float = 10.0) -> float:
    """Mean of the largest k% absolute forward differences; a magnitude, not a quality"""
    q = as_series(series).scores
    if q.size < 2:
        raise InvalidInputError("Variation pooling needs at least two frames")
    g = np.abs(np.diff(q))
    count = _worst_count(k_percent, g.size)
    return float(np.mean(np.sort(g)[::-1][:count]))


def _decay_weights(L: int, decay: float, n: int) -> np.ndarray:
    _check_horizon(L, decay)
    horizon = min(int(L), n - 1)
    w = np.exp(-decay * np.arange(horizon + 1))
    return w / np.sum(w)


def pool_primacy(series: SeriesLike, L: int = 180, alpha_p: float = 0.01) -> float:
    q = as_series(series).scores
    w = _decay_weights(L, alpha_p, q.size)
    return float(np.dot(w, q[: w.size]))


def pool_recency(series: SeriesLike, L: int = 180, alpha_r: float = 0.01) -> float:
    # window anchored at the series end, heaviest weight on the last frame
    q = as_series(series).scores
    w = _decay_weights(L, alpha_r, q.size)
    return float(np.dot(w, q[::-1][: w.size]))


@dataclass(frozen=True, eq=False)
class HysteresisTrace:
    memory: np.ndarray
    current: np.ndarray
    combined: np.ndarray


def half_gaussian_weights(J: int) -> np.ndarray:
    """Descending half of a Gaussian at j = 0..J-1 with sigma J/3, summing to 1"""
    j = np.arange(J)
    w = np.exp(-0.5 * (j / (J / 3.0)) ** 2)
    return w / np.sum(w)


def hysteresis_transform(series: SeriesLike, tau: int = 60, alpha: float = 0.8) -> HysteresisTrace:
    _check_hysteresis(tau, alpha)
    tau = int(tau)
    q = as_series(series).scores
    n = q.size

    # memory: min over the previous tau frames
    before = np.concatenate((np.full(tau, np.inf), q))
    memory = sliding_window_view(before, tau)[:n].min(axis=1)
    memory[0] = q[0]

    # current: ascending window of the next tau+1 frames against half-Gaussian weights
    after = np.concatenate((q, np.full(tau, np.inf)))
    windows = np.sort(sliding_window_view(after, tau + 1)[:n], axis=1)
    J = np.minimum(tau + 1, n - np.arange(n))[:, None]
    j = np.arange(tau + 1)[None, :]
    weights = np.where(j < J, np.exp(-0.5 * (j / (J / 3.0)) ** 2), 0.0)
    weights /= np.sum(weights, axis=1, keepdims=True)
    current = np.sum(np.where(np.isfinite(windows), windows, 0.0) * weights, axis=1)

    combined = alpha * current + (1.0 - alpha) * memory
    for arr in (memory, current, combined):
        arr.setflags(write=False)
    return HysteresisTrace(memory=memory, current=current, combined=combined)


def pool_hysteresis(series: SeriesLike, tau: int = 60, alpha: float = 0.8) -> float:
    return float(np.mean(hysteresis_transform(series, tau, alpha).combined))


_DISPATCH: Dict[PoolingMethod, Callable[[FrameScoreSeries, PoolingSpec], float]] = {
    PoolingMethod.MEAN: lambda s, spec: pool_mean(s),
    PoolingMethod.MEDIAN: lambda s, spec: pool_median(s),
    PoolingMethod.HARMONIC: lambda s, spec: pool_harmonic(s),
    PoolingMethod.GEOMETRIC: lambda s, spec: pool_geometric(s),
    PoolingMethod.MINKOWSKI: lambda s, spec: pool_minkowski(s, spec.p),
    PoolingMethod.PERCENTILE: lambda s, spec: pool_percentile(s, spec.k_percent, spec.higher_is_better),
    PoolingMethod.VQPOOLING: lambda s, spec: pool_vqpooling(s),
    PoolingMethod.VARIATION: lambda s, spec: pool_variation(s, spec.k_percent),
    PoolingMethod.PRIMACY: lambda s, spec: pool_primacy(s, spec.L, spec.alpha_p),
    PoolingMethod.RECENCY: lambda s, spec: pool_recency(s, spec.L, spec.alpha_r),
    PoolingMethod.HYSTERESIS: lambda s, spec: pool_hysteresis(s, spec.tau, spec.alpha),
}


def pool(series: SeriesLike, spec: PoolingSpec) -> float:
    value = _DISPATCH[spec.method](as_series(series), spec)
    return -value if spec.negate else value


def all_methods() -> Tuple[PoolingSpec, ...]:
    """Every pooler at its default setting, in report order"""
    return tuple(PoolingSpec(m) for m in PoolingMethod)
