"""
EPooling: fuse several pooled scores of a video through a learned SVR.

Phase 1 (optional) maps per-frame feature vectors to frame-level predicted MOS, every
frame inheriting the MOS of its video as label. Phase 2 pools the frame scores with
each method of the pooling set and regresses MOS on the resulting quality vector.
Both phases only ever see training videos.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

import tools.pooling_config as cfg
from svr import (
    GridSearchPlan,
    SvrModel,
    as_matrix,
    grid_search_train,
    kfold_indices,
    svr_predict,
    svr_predict_many,
)
from temporal_pooling import FrameScoreSeries, PoolingMethod, PoolingSpec, SeriesLike, as_series, pool
from tools.errors import DimensionError, InvalidInputError, InvalidParameterError, PoolingDomainError

MIN_TRAINING_VIDEOS = 5


def default_pooling_set() -> Tuple[PoolingSpec, ...]:
    return (
        PoolingSpec(PoolingMethod.MEAN),
        PoolingSpec(PoolingMethod.VQPOOLING),
        PoolingSpec(PoolingMethod.HYSTERESIS),
    )


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    pooling_set: Tuple[PoolingSpec, ...]
    fusion_regressor: SvrModel
    seed: int
    fingerprint: str
    frame_predictor: Optional[SvrModel] = None
    nested: bool = False


def _check_pooling_set(pooling_set: Optional[Sequence[PoolingSpec]]) -> Tuple[PoolingSpec, ...]:
    specs = tuple(pooling_set) if pooling_set is not None else default_pooling_set()
    if not specs:
        raise InvalidParameterError("EPooling needs a nonempty pooling set")
    for spec in specs:
        spec.validate()
    return specs


def training_fingerprint(Q: np.ndarray, mos: np.ndarray) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(Q, dtype=float).tobytes())
    digest.update(np.ascontiguousarray(mos, dtype=float).tobytes())
    return digest.hexdigest()


def pooled_quality_vector(
        series: SeriesLike,
        pooling_set: Sequence[PoolingSpec],
        video_id: Optional[str] = None,
) -> np.ndarray:
    s = as_series(series)
    out = np.empty(len(pooling_set))
    for k, spec in enumerate(pooling_set):
        try:
            out[k] = pool(s, spec)
        except PoolingDomainError as e:
            if video_id is None or e.video_id is not None:
                raise
            raise PoolingDomainError(str(e), video_id) from e
        except InvalidInputError as e:
            if video_id is None:
                raise
            raise InvalidInputError(f"video {video_id}: {e}") from e
    return out


def fusion_matrix(
        series_per_video: Sequence[SeriesLike],
        pooling_set: Sequence[PoolingSpec],
        video_ids: Optional[Sequence[str]] = None,
) -> np.ndarray:
    """Quality vectors stacked in input video order"""
    ids = list(video_ids) if video_ids is not None else [str(i) for i in range(len(series_per_video))]
    return np.vstack([pooled_quality_vector(s, pooling_set, vid) for s, vid in zip(series_per_video, ids)])


def _mos_vector(mos: Sequence[float], n: int) -> np.ndarray:
    target = np.asarray(mos, dtype=float).reshape(-1)
    if target.size != n:
        raise InvalidInputError(f"{n} videos but {target.size} MOS values")
    if not np.all(np.isfinite(target)):
        raise InvalidInputError("MOS contains NaN or infinite values")
    return target


def train_frame_predictor(
        frame_features: Sequence[np.ndarray],
        video_mos: Sequence[float],
        plan: Optional[GridSearchPlan] = None,
        seed: int = 0,
        frame_stride: int = cfg.FRAME_STRIDE,
        workers: int = 1,
) -> SvrModel:
    if len(frame_features) == 0:
        raise InvalidInputError("frame predictor needs at least one training video")
    if frame_stride < 1:
        raise InvalidParameterError(f"frame_stride must be positive, got {frame_stride}")
    mats = [as_matrix(f, "frame features") for f in frame_features]
    target = _mos_vector(video_mos, len(mats))
    dims = {m.shape[1] for m in mats}
    if len(dims) != 1:
        raise DimensionError(f"feature dimensions differ across videos: {sorted(dims)}")
    if any(m.shape[0] == 0 for m in mats):
        raise InvalidInputError("every training video needs at least one frame")

    rows = [m[::frame_stride] for m in mats]
    X = np.vstack(rows)
    labels = np.concatenate([np.full(r.shape[0], t) for r, t in zip(rows, target)])
    return grid_search_train(X, labels, plan, seed, workers=workers)


def predict_frame_scores(model: SvrModel, frame_features: np.ndarray) -> FrameScoreSeries:
    X = as_matrix(frame_features, "frame features")
    if X.shape[0] == 0:
        raise InvalidInputError("no frames to predict")
    return FrameScoreSeries(svr_predict_many(model, X))


def _fit_fusion(
        Q: np.ndarray,
        mos: np.ndarray,
        pooling_set: Tuple[PoolingSpec, ...],
        plan: Optional[GridSearchPlan],
        seed: int,
        workers: int,
        frame_predictor: Optional[SvrModel] = None,
        nested: bool = False,
) -> EnsembleModel:
    if Q.shape[0] < MIN_TRAINING_VIDEOS:
        raise InvalidInputError(f"EPooling needs at least {MIN_TRAINING_VIDEOS} training videos, got {Q.shape[0]}")
    fusion = grid_search_train(Q, mos, plan, seed, workers=workers)
    return EnsembleModel(
        pooling_set=pooling_set,
        fusion_regressor=fusion,
        seed=seed,
        fingerprint=training_fingerprint(Q, mos),
        frame_predictor=frame_predictor,
        nested=nested,
    )


def epooling_fit_matrix(
        Q: np.ndarray,
        mos: Sequence[float],
        pooling_set: Sequence[PoolingSpec],
        plan: Optional[GridSearchPlan] = None,
        seed: int = 0,
        workers: int = 1,
) -> EnsembleModel:
    """Phase 2 on quality vectors pooled beforehand, columns in pooling_set order"""
    specs = _check_pooling_set(pooling_set)
    Qm = as_matrix(Q, "quality vectors")
    if Qm.shape[1] != len(specs):
        raise DimensionError(f"{Qm.shape[1]} pooled columns for a pooling set of {len(specs)}")
    return _fit_fusion(Qm, _mos_vector(mos, Qm.shape[0]), specs, plan, seed, workers)


def epooling_train(
        series_per_video: Sequence[SeriesLike],
        mos: Sequence[float],
        pooling_set: Optional[Sequence[PoolingSpec]] = None,
        plan: Optional[GridSearchPlan] = None,
        seed: int = 0,
        video_ids: Optional[Sequence[str]] = None,
        workers: int = 1,
) -> EnsembleModel:
    specs = _check_pooling_set(pooling_set)
    target = _mos_vector(mos, len(series_per_video))
    if len(series_per_video) < MIN_TRAINING_VIDEOS:
        raise InvalidInputError(
            f"EPooling needs at least {MIN_TRAINING_VIDEOS} training videos, got {len(series_per_video)}"
        )
    Q = fusion_matrix(series_per_video, specs, video_ids)
    return _fit_fusion(Q, target, specs, plan, seed, workers)


def epooling_train_from_features(
        frame_features: Sequence[np.ndarray],
        mos: Sequence[float],
        pooling_set: Optional[Sequence[PoolingSpec]] = None,
        plan: Optional[GridSearchPlan] = None,
        frame_plan: Optional[GridSearchPlan] = None,
        seed: int = 0,
        nested: bool = False,
        video_ids: Optional[Sequence[str]] = None,
        frame_stride: int = cfg.FRAME_STRIDE,
        workers: int = 1,
) -> EnsembleModel:
    """Both phases from per-frame features.

    In nested mode the phase-2 inputs of each training video come from a frame
    predictor that never saw that video (2-fold cross-fitting); otherwise they are
    in-sample predictions of the final frame predictor.
    """
    specs = _check_pooling_set(pooling_set)
    target = _mos_vector(mos, len(frame_features))
    if len(frame_features) < MIN_TRAINING_VIDEOS:
        raise InvalidInputError(
            f"EPooling needs at least {MIN_TRAINING_VIDEOS} training videos, got {len(frame_features)}"
        )
    predictor = train_frame_predictor(frame_features, target, frame_plan, seed, frame_stride, workers)

    if nested:
        series: List[Optional[FrameScoreSeries]] = [None] * len(frame_features)
        for train, held_out in kfold_indices(len(frame_features), 2, seed):
            fold_predictor = train_frame_predictor(
                [frame_features[i] for i in train], target[train], frame_plan, seed, frame_stride, workers
            )
            for i in held_out:
                series[i] = predict_frame_scores(fold_predictor, frame_features[i])
    else:
        series = [predict_frame_scores(predictor, f) for f in frame_features]

    Q = fusion_matrix(series, specs, video_ids)
    return _fit_fusion(Q, target, specs, plan, seed, workers, frame_predictor=predictor, nested=nested)


def epooling_predict(model: EnsembleModel, series: SeriesLike, video_id: Optional[str] = None) -> float:
    q = pooled_quality_vector(series, model.pooling_set, video_id)
    return svr_predict(model.fusion_regressor, q)


def epooling_predict_from_features(
        model: EnsembleModel,
        frame_features: np.ndarray,
        video_id: Optional[str] = None,
) -> float:
    if model.frame_predictor is None:
        raise InvalidParameterError("this ensemble was trained on frame scores and has no frame predictor")
    return epooling_predict(model, predict_frame_scores(model.frame_predictor, frame_features), video_id)
