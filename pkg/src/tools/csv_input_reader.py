from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from tools.errors import CsvParseError

FRAME_SCORES = "frame_scores"
FEATURES = "features"
MOS = "mos"


@dataclass(frozen=True)
class DatasetFragment:
    """What one input file contributes, keyed by video id in file order"""

    kind: str
    path: str
    values: Dict[str, object] = field(default_factory=dict)

    @property
    def ids(self) -> List[str]:
        return list(self.values)


class InputCsvReader:
    FRAME_SCORE_COLUMNS = ("video_id", "frame_index", "score")
    FEATURE_KEY_COLUMNS = ("video_id", "frame_index")
    MOS_COLUMNS = ("video_id", "mos")

    def read_frame_scores(self, csv_path: str) -> DatasetFragment:
        frames: Dict[str, Dict[int, float]] = {}
        last_line: Dict[str, int] = {}
        for line, row in self._rows(csv_path, self.FRAME_SCORE_COLUMNS):
            vid = self._video_id(csv_path, line, row)
            index = self._frame_index(csv_path, line, row)
            value = self._number(csv_path, line, row, "score")
            per_video = frames.setdefault(vid, {})
            if index in per_video:
                raise CsvParseError(csv_path, line, f"duplicate frame_index {index} for video {vid}")
            per_video[index] = value
            last_line[vid] = line

        return DatasetFragment(
            FRAME_SCORES,
            csv_path,
            {vid: np.array(self._dense(csv_path, last_line[vid], vid, per_video)) for vid, per_video in frames.items()},
        )

    def read_features(self, csv_path: str) -> DatasetFragment:
        self._ensure_csv_exists(csv_path)
        frames: Dict[str, Dict[int, List[float]]] = {}
        last_line: Dict[str, int] = {}
        with open(csv_path, "rb") as f:
            reader = csv.DictReader(self._text_lines(csv_path, f))
            headers = self._normalize_headers(reader.fieldnames)
            if tuple(headers[:2]) != self.FEATURE_KEY_COLUMNS or len(headers) < 3:
                raise CsvParseError(
                    csv_path, 1, "features CSV must start with 'video_id,frame_index' followed by feature columns"
                )
            reader.fieldnames = headers
            feature_columns = headers[2:]
            for row in reader:
                line = reader.line_num
                if None in row:
                    raise CsvParseError(csv_path, line, f"expected {len(feature_columns)} feature values")
                vid = self._video_id(csv_path, line, row)
                index = self._frame_index(csv_path, line, row)
                vector = [self._number(csv_path, line, row, c) for c in feature_columns]
                per_video = frames.setdefault(vid, {})
                if index in per_video:
                    raise CsvParseError(csv_path, line, f"duplicate frame_index {index} for video {vid}")
                per_video[index] = vector
                last_line[vid] = line

        return DatasetFragment(
            FEATURES,
            csv_path,
            {
                vid: np.array(self._dense(csv_path, last_line[vid], vid, per_video), dtype=float)
                for vid, per_video in frames.items()
            },
        )

    def read_mos(self, csv_path: str) -> DatasetFragment:
        mos: Dict[str, float] = {}
        for line, row in self._rows(csv_path, self.MOS_COLUMNS):
            vid = self._video_id(csv_path, line, row)
            if vid in mos:
                raise CsvParseError(csv_path, line, f"duplicate video_id {vid}")
            mos[vid] = self._number(csv_path, line, row, "mos")
        return DatasetFragment(MOS, csv_path, mos)

    def _rows(self, csv_path: str, required: Sequence[str]) -> Iterator[Tuple[int, Dict[str, str]]]:
        self._ensure_csv_exists(csv_path)
        with open(csv_path, "rb") as f:
            reader = csv.DictReader(self._text_lines(csv_path, f))
            headers = self._normalize_headers(reader.fieldnames)
            missing = [c for c in required if c not in headers]
            if missing:
                raise CsvParseError(csv_path, 1, f"CSV header lacks column(s) {', '.join(missing)}")
            reader.fieldnames = headers
            for row in reader:
                yield reader.line_num, row

    def _text_lines(self, csv_path: str, f: BinaryIO) -> Iterator[str]:
        for number, raw in enumerate(f, start=1):
            try:
                yield raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise CsvParseError(csv_path, number, f"not valid UTF-8 at byte {e.start}") from None

    def _video_id(self, csv_path: str, line: int, row: Dict[str, str]) -> str:
        vid = (row.get("video_id") or "").strip()
        if not vid:
            raise CsvParseError(csv_path, line, "empty video_id")
        return vid

    def _frame_index(self, csv_path: str, line: int, row: Dict[str, str]) -> int:
        raw = (row.get("frame_index") or "").strip()
        try:
            index = int(raw)
        except ValueError:
            raise CsvParseError(csv_path, line, f"frame_index {raw!r} is not an integer") from None
        if index < 0:
            raise CsvParseError(csv_path, line, f"frame_index {index} is negative")
        return index

    def _number(self, csv_path: str, line: int, row: Dict[str, str], column: str) -> float:
        raw = (row.get(column) or "").strip()
        try:
            value = float(raw)
        except ValueError:
            raise CsvParseError(csv_path, line, f"non-numeric value {raw!r} in column {column}") from None
        if not np.isfinite(value):
            raise CsvParseError(csv_path, line, f"non-finite value {raw!r} in column {column}")
        return value

    def _dense(self, csv_path: str, line: int, vid: str, per_video: Dict[int, object]) -> List[object]:
        # frame indices are 0-based and may not skip
        expected = set(range(len(per_video)))
        if set(per_video) != expected:
            gaps = sorted(expected - set(per_video))
            raise CsvParseError(csv_path, line, f"frame indices of video {vid} are not dense, missing {gaps[:5]}")
        return [per_video[i] for i in range(len(per_video))]

    def _ensure_csv_exists(self, csv_path: str) -> None:
        if not os.path.exists(csv_path):
            raise FileNotFoundError(f"CSV file not found: {csv_path}")

    def _normalize_headers(self, fieldnames: Optional[Iterable[str]]) -> List[str]:
        if not fieldnames:
            return []
        return [h.strip() for h in fieldnames]
