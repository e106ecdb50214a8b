"""
Dataset assembly and the repeated train/test evaluation protocol.

Every trial draws its own split from a seed derived from (master seed, trial index),
so trials can run in any order or in parallel without changing a single number.
All methods of one trial share the same test videos.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import tools.pooling_config as cfg
from epooling import (
    default_pooling_set,
    epooling_fit_matrix,
    epooling_train_from_features,
    predict_frame_scores,
    train_frame_predictor,
)
from quality_stats import median_of, plcc_after_logistic, srcc
from svr import GridSearchPlan, svr_predict_many
from temporal_pooling import FrameScoreSeries, PoolingMethod, PoolingSpec, pool
from tools.csv_input_reader import FEATURES, FRAME_SCORES, MOS, DatasetFragment, InputCsvReader
from tools.errors import DATA_ERRORS, DatasetError, InvalidInputError, InvalidParameterError
from tools.tp_console import tp_print


@dataclass(frozen=True, eq=False)
class VideoRecord:
    id: str
    mos: float
    frame_scores: Optional[FrameScoreSeries] = None
    frame_features: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.frame_scores is None and self.frame_features is None:
            raise DatasetError(f"video {self.id} has neither frame scores nor frame features")
        if self.frame_scores is not None and not isinstance(self.frame_scores, FrameScoreSeries):
            object.__setattr__(self, "frame_scores", FrameScoreSeries(self.frame_scores))
        if self.frame_features is not None:
            feats = np.array(self.frame_features, dtype=float)
            if feats.ndim != 2 or feats.shape[0] == 0:
                raise DatasetError(f"video {self.id}: frame features must be a nonempty matrix")
            feats.setflags(write=False)
            object.__setattr__(self, "frame_features", feats)
        if (
                self.frame_scores is not None
                and self.frame_features is not None
                and len(self.frame_scores) != self.frame_features.shape[0]
        ):
            raise DatasetError(
                f"video {self.id}: {len(self.frame_scores)} frame scores "
                f"but {self.frame_features.shape[0]} feature rows"
            )

    @property
    def frame_count(self) -> int:
        if self.frame_scores is not None:
            return len(self.frame_scores)
        return int(self.frame_features.shape[0])


@dataclass(frozen=True, eq=False)
class Dataset:
    records: Tuple[VideoRecord, ...]
    mos_scale: Tuple[float, float]
    higher_is_better: bool = True

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        low, high = (float(v) for v in self.mos_scale)
        object.__setattr__(self, "mos_scale", (low, high))
        if not self.records:
            raise DatasetError("dataset has no videos")
        if low > high:
            raise DatasetError(f"MOS scale ({low}, {high}) is reversed")
        seen = set()
        for r in self.records:
            if r.id in seen:
                raise DatasetError(f"duplicate video id {r.id}")
            seen.add(r.id)
            if not (low <= r.mos <= high):
                raise DatasetError(f"video {r.id}: MOS {r.mos} outside scale [{low}, {high}]")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.records]

    @property
    def mos(self) -> np.ndarray:
        return np.array([r.mos for r in self.records], dtype=float)

    @property
    def has_scores(self) -> bool:
        return all(r.frame_scores is not None for r in self.records)

    @property
    def has_features(self) -> bool:
        return all(r.frame_features is not None for r in self.records)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(tuple(self.records[i] for i in indices), self.mos_scale, self.higher_is_better)


def load_frame_scores(path: str) -> DatasetFragment:
    return InputCsvReader().read_frame_scores(path)


def load_features(path: str) -> DatasetFragment:
    return InputCsvReader().read_features(path)


def load_mos(path: str) -> DatasetFragment:
    return InputCsvReader().read_mos(path)


def _offenders(ids: Sequence[str], limit: int = 10) -> str:
    shown = ", ".join(ids[:limit])
    more = f" (+{len(ids) - limit} more)" if len(ids) > limit else ""
    return shown + more


def assemble_dataset(
        fragments: Sequence[DatasetFragment],
        mos_scale: Optional[Tuple[float, float]] = None,
        higher_is_better: bool = True,
) -> Dataset:
    """Joins fragments on video id; records follow the MOS file order"""
    by_kind: Dict[str, DatasetFragment] = {}
    for fragment in fragments:
        if fragment.kind in by_kind:
            raise DatasetError(f"two {fragment.kind} files given: {by_kind[fragment.kind].path}, {fragment.path}")
        by_kind[fragment.kind] = fragment
    if MOS not in by_kind:
        raise DatasetError("a MOS file is required")
    if FRAME_SCORES not in by_kind and FEATURES not in by_kind:
        raise DatasetError("a frame-scores or features file is required")

    mos = by_kind[MOS]
    problems = []
    for kind in (FRAME_SCORES, FEATURES):
        if kind not in by_kind:
            continue
        data = by_kind[kind]
        unknown = [vid for vid in data.ids if vid not in mos.values]
        missing = [vid for vid in mos.ids if vid not in data.values]
        if unknown:
            problems.append(f"ids in {data.path} without MOS: {_offenders(unknown)}")
        if missing:
            problems.append(f"ids in {mos.path} without {kind.replace('_', ' ')}: {_offenders(missing)}")
    if problems:
        raise DatasetError("; ".join(problems))

    scores = by_kind.get(FRAME_SCORES)
    features = by_kind.get(FEATURES)
    records = tuple(
        VideoRecord(
            id=vid,
            mos=float(value),
            frame_scores=FrameScoreSeries(scores.values[vid]) if scores else None,
            frame_features=features.values[vid] if features else None,
        )
        for vid, value in mos.values.items()
    )
    if mos_scale is None:
        values = [r.mos for r in records]
        mos_scale = (min(values), max(values))
    return Dataset(records, mos_scale, higher_is_better)


def split_indices(n: int, train_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    if not (0.0 < train_fraction < 1.0):
        raise InvalidParameterError(f"train fraction must lie in (0, 1), got {train_fraction}")
    if n < 2:
        raise InvalidInputError(f"cannot split {n} videos into train and test portions")
    # half-up rounding, kept away from empty portions
    n_train = int(np.floor(train_fraction * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_dataset(dataset: Dataset, train_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    train, test = split_indices(len(dataset), train_fraction, seed)
    return dataset.subset(train), dataset.subset(test)


def derive_trial_seed(seed: int, trial: int) -> int:
    if seed < 0 or trial < 0:
        raise InvalidParameterError(f"seed and trial must be nonnegative, got {seed}, {trial}")
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


@dataclass(frozen=True)
class EPoolingConfig:
    """EPooling as one method of an evaluation; trained anew on every training portion"""

    pooling_set: Tuple[PoolingSpec, ...] = field(default_factory=default_pooling_set)
    plan: Optional[GridSearchPlan] = None
    nested: bool = False
    label: str = "EPooling"


EvalMethod = Union[PoolingSpec, EPoolingConfig]


def method_label(method: EvalMethod) -> str:
    return method.label


@dataclass(frozen=True)
class TrialResult:
    method: str
    trial: int
    seed: int
    srcc: float = float("nan")
    plcc: float = float("nan")
    error: Optional[str] = None
    # set when only the PLCC of an otherwise scored trial is undefined
    plcc_error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class MethodSummary:
    method: str
    median_srcc: float
    median_plcc: float
    trials: int
    failed_trials: int

    @property
    def failed(self) -> bool:
        return self.failed_trials == self.trials


def _summarize(method: str, rows: Sequence[TrialResult], trials: int) -> MethodSummary:
    good = [r for r in rows if r.ok]
    if not good:
        return MethodSummary(method, float("nan"), float("nan"), trials, len(rows))
    plccs = [r.plcc for r in good if r.plcc_error is None]
    return MethodSummary(
        method,
        median_of([r.srcc for r in good]),
        median_of(plccs) if plccs else float("nan"),
        trials,
        len(rows) - len(good),
    )


@dataclass(frozen=True, eq=False)
class EvalReport:
    methods: Tuple[str, ...]
    results: Tuple[TrialResult, ...]
    trials: int
    seed: int
    train_fraction: float
    summaries: Tuple[MethodSummary, ...] = ()

    def __post_init__(self):
        if not self.summaries:
            object.__setattr__(
                self,
                "summaries",
                tuple(_summarize(m, self.rows_for(m), self.trials) for m in self.methods),
            )

    def rows_for(self, method: str) -> List[TrialResult]:
        return [r for r in self.results if r.method == method]

    def summary(self, method: str) -> MethodSummary:
        for s in self.summaries:
            if s.method == method:
                return s
        raise KeyError(method)

    def recomputed_medians(self) -> Dict[str, Tuple[float, float]]:
        out = {}
        for m in self.methods:
            s = _summarize(m, self.rows_for(m), self.trials)
            out[m] = (s.median_srcc, s.median_plcc)
        return out


def _orient(method: EvalMethod, higher_is_better: bool) -> EvalMethod:
    if isinstance(method, PoolingSpec) and method.method == PoolingMethod.PERCENTILE:
        return dataclasses.replace(method, higher_is_better=higher_is_better)
    if isinstance(method, EPoolingConfig):
        specs = tuple(_orient(s, higher_is_better) for s in method.pooling_set)
        return dataclasses.replace(method, pooling_set=specs)
    return method


def _pool_all(series: Sequence[FrameScoreSeries], spec: PoolingSpec, ids: Sequence[str]) -> List[object]:
    """Pooled value per video, or the error message for videos the pooler rejects"""
    out: List[object] = []
    for s, vid in zip(series, ids):
        try:
            out.append(pool(s, spec))
        except DATA_ERRORS as e:
            out.append(f"video {vid}: {e}")
    return out


def _gather(pooled: List[object], indices: np.ndarray) -> np.ndarray:
    picked = [pooled[i] for i in indices]
    for value in picked:
        if isinstance(value, str):
            raise InvalidInputError(value)
    return np.array(picked, dtype=float)


def _correlate(label: str, trial: int, seed: int, pred: np.ndarray, mos: np.ndarray) -> TrialResult:
    try:
        rank = srcc(pred, mos)
    except DATA_ERRORS as e:
        return TrialResult(label, trial, seed, error=str(e))
    try:
        return TrialResult(label, trial, seed, rank, plcc_after_logistic(pred, mos))
    except DATA_ERRORS as e:
        return TrialResult(label, trial, seed, rank, plcc_error=str(e))


class _TrialRunner:
    """Evaluates all methods on one trial's split"""

    def __init__(
            self,
            dataset: Dataset,
            methods: Sequence[EvalMethod],
            train_fraction: float,
            seed: int,
            frame_plan: Optional[GridSearchPlan],
            frame_stride: int,
    ):
        self.dataset = dataset
        self.methods = list(methods)
        self.train_fraction = train_fraction
        self.seed = seed
        self.frame_plan = frame_plan
        self.frame_stride = frame_stride
        self.ids = dataset.ids
        self.mos = dataset.mos
        self.use_scores = dataset.has_scores
        # pooled values do not depend on the split, so pool each video once per spec
        self.cache: Dict[PoolingSpec, List[object]] = {}
        if self.use_scores:
            series = [r.frame_scores for r in dataset.records]
            for spec in self._all_specs():
                self.cache[spec] = _pool_all(series, spec, self.ids)

    def _all_specs(self) -> List[PoolingSpec]:
        specs: List[PoolingSpec] = []
        for m in self.methods:
            for spec in (m.pooling_set if isinstance(m, EPoolingConfig) else (m,)):
                if spec not in specs:
                    specs.append(spec)
        return specs

    def run(self, trial: int) -> List[TrialResult]:
        trial_seed = derive_trial_seed(self.seed, trial)
        train, test = split_indices(len(self.dataset), self.train_fraction, trial_seed)
        if self.use_scores:
            return [self._scores_trial(m, trial, trial_seed, train, test) for m in self.methods]
        return self._features_trial(trial, trial_seed, train, test)

    def _scores_trial(self, method: EvalMethod, trial: int, seed: int, train, test) -> TrialResult:
        try:
            if isinstance(method, PoolingSpec):
                pred = _gather(self.cache[method], test)
            else:
                pred = self._epooling_on_cache(method, seed, train, test)
        except DATA_ERRORS as e:
            return TrialResult(method.label, trial, seed, error=str(e))
        return _correlate(method.label, trial, seed, pred, self.mos[test])

    def _epooling_on_cache(self, method: EPoolingConfig, seed: int, train, test) -> np.ndarray:
        Q_train = np.column_stack([_gather(self.cache[s], train) for s in method.pooling_set])
        Q_test = np.column_stack([_gather(self.cache[s], test) for s in method.pooling_set])
        model = epooling_fit_matrix(Q_train, self.mos[train], method.pooling_set, method.plan, seed)
        return svr_predict_many(model.fusion_regressor, Q_test)

    def _features_trial(self, trial: int, seed: int, train, test) -> List[TrialResult]:
        records = self.dataset.records
        try:
            predictor = train_frame_predictor(
                [records[i].frame_features for i in train],
                self.mos[train],
                self.frame_plan,
                seed,
                self.frame_stride,
            )
        except DATA_ERRORS as e:
            return [TrialResult(m.label, trial, seed, error=f"frame predictor: {e}") for m in self.methods]

        need_train = any(isinstance(m, EPoolingConfig) and not m.nested for m in self.methods)
        wanted = np.concatenate((train, test)) if need_train else test
        series = {int(i): predict_frame_scores(predictor, records[i].frame_features) for i in wanted}

        pooled: Dict[PoolingSpec, List[object]] = {}
        n = len(records)
        for spec in self._all_specs():
            values: List[object] = ["not predicted"] * n
            keys = sorted(series)
            for i, v in zip(keys, _pool_all([series[i] for i in keys], spec, [self.ids[i] for i in keys])):
                values[i] = v
            pooled[spec] = values

        out = []
        for m in self.methods:
            try:
                if isinstance(m, PoolingSpec):
                    pred = _gather(pooled[m], test)
                elif m.nested:
                    pred = self._nested_epooling(m, seed, train, test, series)
                else:
                    Q_train = np.column_stack([_gather(pooled[s], train) for s in m.pooling_set])
                    Q_test = np.column_stack([_gather(pooled[s], test) for s in m.pooling_set])
                    model = epooling_fit_matrix(Q_train, self.mos[train], m.pooling_set, m.plan, seed)
                    pred = svr_predict_many(model.fusion_regressor, Q_test)
            except DATA_ERRORS as e:
                out.append(TrialResult(m.label, trial, seed, error=str(e)))
                continue
            out.append(_correlate(m.label, trial, seed, pred, self.mos[test]))
        return out

    def _nested_epooling(self, method: EPoolingConfig, seed: int, train, test, series) -> np.ndarray:
        records = self.dataset.records
        model = epooling_train_from_features(
            [records[i].frame_features for i in train],
            self.mos[train],
            method.pooling_set,
            method.plan,
            self.frame_plan,
            seed,
            nested=True,
            video_ids=[self.ids[i] for i in train],
            frame_stride=self.frame_stride,
        )
        # the stored frame predictor saw the same videos and seed as the shared one
        Q_test = np.vstack(
            [[pool(series[int(i)], spec) for spec in method.pooling_set] for i in test]
        )
        return svr_predict_many(model.fusion_regressor, Q_test)


def _check_methods(methods: Sequence[EvalMethod]) -> None:
    if not methods:
        raise InvalidParameterError("no methods to evaluate")
    labels = [m.label for m in methods]
    duplicates = sorted({x for x in labels if labels.count(x) > 1})
    if duplicates:
        raise InvalidParameterError(f"methods listed twice: {', '.join(duplicates)}")
    for m in methods:
        for spec in (m.pooling_set if isinstance(m, EPoolingConfig) else (m,)):
            spec.validate()
        if isinstance(m, EPoolingConfig) and not m.pooling_set:
            raise InvalidParameterError("EPooling needs a nonempty pooling set")


def run_pooling_evaluation(
        dataset: Dataset,
        methods: Sequence[EvalMethod],
        trials: int = cfg.TRIALS,
        seed: int = cfg.SEED,
        train_fraction: float = cfg.TRAIN_FRACTION,
        workers: int = cfg.WORKERS,
        frame_plan: Optional[GridSearchPlan] = None,
        frame_stride: int = cfg.FRAME_STRIDE,
) -> EvalReport:
    """Median SRCC / logistic-mapped PLCC of every method over seeded random splits.

    With frame scores the poolers read them directly. Datasets carrying only frame
    features get a frame predictor trained on each training portion first, and every
    pooler then works on its predictions.
    """
    if trials < 1:
        raise InvalidParameterError(f"trials must be positive, got {trials}")
    if workers < 1:
        raise InvalidParameterError(f"workers must be positive, got {workers}")
    _check_methods(methods)
    if not dataset.has_scores and not dataset.has_features:
        raise InvalidInputError("every video needs frame scores, or every video needs frame features")
    split_indices(len(dataset), train_fraction, seed)

    oriented = [_orient(m, dataset.higher_is_better) for m in methods]
    runner = _TrialRunner(dataset, oriented, train_fraction, seed, frame_plan, frame_stride)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool_:
            per_trial = list(pool_.map(runner.run, range(trials)))
    else:
        per_trial = [runner.run(t) for t in range(trials)]

    labels = tuple(m.label for m in oriented)
    results = tuple(per_trial[t][k] for k in range(len(labels)) for t in range(trials))
    report = EvalReport(labels, results, trials, seed, train_fraction)

    for s in report.summaries:
        if s.failed:
            first = report.rows_for(s.method)[0].error
            tp_print.error(f"{s.method} failed in every trial: {first}", element=s.method)
        elif s.failed_trials:
            first = next(r.error for r in report.rows_for(s.method) if not r.ok)
            tp_print.warning(f"{s.method} failed {s.failed_trials}/{s.trials} trials, e.g. {first}")
        undefined = [r for r in report.rows_for(s.method) if r.ok and r.plcc_error is not None]
        if undefined:
            tp_print.warning(
                f"{s.method}: PLCC undefined in {len(undefined)}/{s.trials} trials, e.g. {undefined[0].plcc_error}"
            )
    return report
