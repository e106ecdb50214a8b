"""
Seeded synthetic datasets: frame-score trajectories with drift, correlated jitter and
quality dips, and MOS produced from them by a known rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from protocol import Dataset, VideoRecord
from temporal_pooling import FrameScoreSeries, pool_hysteresis, pool_mean, pool_percentile
from tools.errors import InvalidParameterError

MOS_RULES = ("mean", "worst_percentile", "hysteresis_like")

MIN_SCORE = 0.1
_AR_COEF = 0.8
_AR_SD = 0.08
_DIPS_PER_150_FRAMES = 1.5


@dataclass(frozen=True)
class SynthSpec:
    n_videos: int = 100
    frames_per_video: int = 150
    mos_rule: str = "mean"
    noise_sd: float = 0.0
    seed: int = 0
    feature_dim: int = 0

    def validate(self) -> None:
        if self.n_videos < 1 or self.frames_per_video < 1:
            raise InvalidParameterError(
                f"need positive sizes, got {self.n_videos} videos of {self.frames_per_video} frames"
            )
        if self.mos_rule not in MOS_RULES:
            raise InvalidParameterError(f"unknown MOS rule {self.mos_rule!r} (expected one of {', '.join(MOS_RULES)})")
        if self.noise_sd < 0:
            raise InvalidParameterError(f"noise_sd must be nonnegative, got {self.noise_sd}")
        if self.feature_dim < 0:
            raise InvalidParameterError(f"feature_dim must be nonnegative, got {self.feature_dim}")
        if self.seed < 0:
            raise InvalidParameterError(f"seed must be nonnegative, got {self.seed}")


def _trajectory(rng: np.random.Generator, n: int) -> np.ndarray:
    base = rng.uniform(1.5, 4.5)
    drift = rng.normal(0.0, 0.5) * np.linspace(-0.5, 0.5, n)

    jitter = np.empty(n)
    e = 0.0
    for t in range(n):
        e = _AR_COEF * e + rng.normal(0.0, _AR_SD)
        jitter[t] = e

    dips = np.zeros(n)
    for _ in range(rng.poisson(_DIPS_PER_150_FRAMES * n / 150.0)):
        length = int(rng.integers(8, 26))
        start = int(rng.integers(0, n))
        depth = rng.uniform(0.5, 2.0)
        shape = depth * np.hanning(length + 2)[1:-1]
        stop = min(n, start + length)
        dips[start:stop] += shape[: stop - start]

    return np.maximum(base + drift + jitter - dips, MIN_SCORE)


def _features(rng: np.random.Generator, q: np.ndarray, dim: int) -> np.ndarray:
    cols = [q + rng.normal(0.0, 0.05, q.size)]
    if dim > 1:
        cols.append(q ** 2 / 5.0 + rng.normal(0.0, 0.05, q.size))
    for _ in range(dim - len(cols)):
        cols.append(rng.normal(0.0, 1.0, q.size))
    return np.column_stack(cols[:dim])


_RULES = {
    "mean": pool_mean,
    "worst_percentile": lambda q: pool_percentile(q, 10.0),
    "hysteresis_like": pool_hysteresis,
}


def synth_generate(spec: SynthSpec) -> Dataset:
    spec.validate()
    # trajectories do not depend on the feature dimension
    score_seq, feature_seq = np.random.SeedSequence(spec.seed).spawn(2)
    rng = np.random.default_rng(score_seq)
    feature_rng = np.random.default_rng(feature_seq)
    rule = _RULES[spec.mos_rule]

    records = []
    for v in range(spec.n_videos):
        q = _trajectory(rng, spec.frames_per_video)
        mos = rule(q) + spec.noise_sd * rng.standard_normal()
        feats = _features(feature_rng, q, spec.feature_dim) if spec.feature_dim else None
        records.append(VideoRecord(f"vid{v:04d}", float(mos), FrameScoreSeries(q), feats))

    values = [r.mos for r in records]
    return Dataset(tuple(records), (min(values), max(values)), higher_is_better=True)


def frame_score_table(dataset: Dataset) -> Dict[str, np.ndarray]:
    return {r.id: np.asarray(r.frame_scores.scores) for r in dataset.records}


def feature_table(dataset: Dataset) -> Dict[str, np.ndarray]:
    return {r.id: np.asarray(r.frame_features) for r in dataset.records if r.frame_features is not None}


def mos_table(dataset: Dataset) -> Dict[str, float]:
    return {r.id: r.mos for r in dataset.records}
