import csv
from typing import Mapping

import numpy as np


def _num(v: float) -> str:
    return repr(float(v))


def write_frame_scores(path: str, scores: Mapping[str, np.ndarray]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["video_id", "frame_index", "score"])
        for vid, series in scores.items():
            for n, q in enumerate(series):
                writer.writerow([vid, n, _num(q)])


def write_features(path: str, features: Mapping[str, np.ndarray]) -> None:
    dims = {np.asarray(m).shape[1] for m in features.values()}
    if len(dims) > 1:
        raise ValueError(f"feature arity differs across videos: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["video_id", "frame_index"] + [f"f{k}" for k in range(dim)])
        for vid, matrix in features.items():
            for n, row in enumerate(np.asarray(matrix)):
                writer.writerow([vid, n] + [_num(v) for v in row])


def write_mos(path: str, mos: Mapping[str, float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["video_id", "mos"])
        for vid, value in mos.items():
            writer.writerow([vid, _num(value)])
