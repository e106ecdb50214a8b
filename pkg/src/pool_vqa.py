"""
Usage: pool_vqa.py pool <scores_csv> [options]
       pool_vqa.py evaluate <mos_csv> (--scores=<csv> | --features=<csv>) [options]
       pool_vqa.py ensemble-train <mos_csv> (--scores=<csv> | --features=<csv>) --model=<path> [options]
       pool_vqa.py ensemble-predict <model_path> (--scores=<csv> | --features=<csv>) [options]
       pool_vqa.py synth <out_prefix> [options]
       pool_vqa.py --help

Temporal pooling of frame-level quality scores, evaluation over seeded train/test
splits, and EPooling ensemble training and prediction.

Unset pooling and evaluation values come from .pooling.ini (or the file named by
TPOOL_CONFIG); the defaults below apply when that file does not set them.

Options
  -h, --help                 Show this screen
  --method=<name>            pool: method to apply [default: mean]
                             (mean, median, harmonic, geometric, minkowski, percentile,
                             vqpooling, variation, primacy, recency, hysteresis)
  --methods=<list>           evaluate: comma-separated methods, or "all" [default: all]
  --epooling                 evaluate: add EPooling to the compared methods
  --pooling-set=<list>       EPooling constituents (default: mean,vqpooling,hysteresis)
  --nested                   EPooling on features: cross-fit the frame scores of training videos
  --scores=<csv>             frame scores file (video_id,frame_index,score)
  --features=<csv>           frame features file (video_id,frame_index,f0,f1,...)
  --model=<path>             ensemble-train: model file to write
  --out=<path>               write output to this file instead of standard output
  --format=<fmt>             evaluate: report format, markdown or csv [default: markdown]
  --trials=<n>               evaluate: number of random splits (default: 100)
  --seed=<n>                 master seed for splits and grid-search folds (default: 0)
  --train-fraction=<f>       evaluate: training share of every split (default: 0.8)
  --workers=<n>              threads for trials and grid search (default: 1)
  --frame-stride=<k>         frame predictor trains on every k-th frame (default: 1)
  --mos-scale=<lo,hi>        declared MOS range (default: observed range)
  --lower-is-better          frame scores are distortion-like: lower means better
  --minkowski-p=<p>          Minkowski exponent (default: 2)
  --percentile-k=<k>         Percentile: worst share of frames in percent (default: 10)
  --variation-k=<k>          Variation: largest share of frame differences in percent (default: 10)
  --negate-variation         Variation: negate so that larger means better
  --horizon=<L>              Primacy and Recency: window length in frames (default: 180)
  --alpha-p=<a>              Primacy: decay rate (default: 0.01)
  --alpha-r=<a>              Recency: decay rate (default: 0.01)
  --hysteresis-tau=<tau>     Hysteresis: memory and look-ahead window in frames (default: 60)
  --hysteresis-alpha=<a>     Hysteresis: weight of the current-quality term (default: 0.8)
  --videos=<n>               synth: number of videos [default: 100]
  --frames=<n>               synth: frames per video [default: 150]
  --mos-rule=<rule>          synth: mean, worst_percentile or hysteresis_like [default: mean]
  --noise-sd=<sd>            synth: standard deviation of MOS noise [default: 0.1]
  --feature-dim=<d>          synth: also write a features file with d columns [default: 0]

Exit status: 0 success, 1 usage or parse error, 2 domain or data error, 3 internal error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import click
from docopt import DocoptExit, docopt

import tools.pooling_config as cfg
from epooling import (
    EnsembleModel,
    default_pooling_set,
    epooling_predict,
    epooling_predict_from_features,
    epooling_train,
    epooling_train_from_features,
)
from model_store import read_ensemble, write_ensemble
from protocol import (
    Dataset,
    EPoolingConfig,
    EvalMethod,
    assemble_dataset,
    load_features,
    load_frame_scores,
    load_mos,
    run_pooling_evaluation,
)
from reporting import emit_report
from synthetic import SynthSpec, feature_table, frame_score_table, mos_table, synth_generate
from temporal_pooling import PoolingMethod, PoolingSpec, all_methods, parse_method, pool
from tools.csv_output_writer import write_features, write_frame_scores, write_mos
from tools.errors import DATA_ERRORS, CsvParseError, ModelFormatError, PoolingDomainError, UsageError
from tools.tp_console import tp_print

COMMANDS = ("pool", "evaluate", "ensemble-train", "ensemble-predict", "synth")


@dataclass(frozen=True)
class CliConfig:
    command: str
    scores_path: Optional[str] = None
    features_path: Optional[str] = None
    mos_path: Optional[str] = None
    model_path: Optional[str] = None
    out_path: Optional[str] = None
    out_prefix: Optional[str] = None
    report_format: str = "markdown"
    pool_spec: Optional[PoolingSpec] = None
    methods: Tuple[EvalMethod, ...] = ()
    pooling_set: Tuple[PoolingSpec, ...] = field(default_factory=default_pooling_set)
    nested: bool = False
    trials: int = cfg.TRIALS
    seed: int = cfg.SEED
    train_fraction: float = cfg.TRAIN_FRACTION
    workers: int = cfg.WORKERS
    frame_stride: int = cfg.FRAME_STRIDE
    mos_scale: Optional[Tuple[float, float]] = None
    higher_is_better: bool = True
    synth: Optional[SynthSpec] = None


def _value(args: Dict[str, object], key: str, cast, fallback):
    raw = args.get(key)
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"--{key}: cannot read {raw!r} as {cast.__name__}") from None


def _spec(method: PoolingMethod, args: Dict[str, object]) -> PoolingSpec:
    k_key, k_default = ("variation-k", cfg.VARIATION_K) if method == PoolingMethod.VARIATION else (
        "percentile-k", cfg.PERCENTILE_K)
    return PoolingSpec(
        method,
        p=_value(args, "minkowski-p", float, cfg.MINKOWSKI_P),
        k_percent=_value(args, k_key, float, k_default),
        L=_value(args, "horizon", int, cfg.PRIMACY_L),
        alpha_p=_value(args, "alpha-p", float, cfg.ALPHA_P),
        alpha_r=_value(args, "alpha-r", float, cfg.ALPHA_R),
        tau=_value(args, "hysteresis-tau", int, cfg.HYSTERESIS_TAU),
        alpha=_value(args, "hysteresis-alpha", float, cfg.HYSTERESIS_ALPHA),
        higher_is_better=not args["lower-is-better"],
        negate=bool(args["negate-variation"]) and method == PoolingMethod.VARIATION,
    )


def _spec_list(raw: str, args: Dict[str, object]) -> Tuple[PoolingSpec, ...]:
    names = [n for n in raw.split(",") if n.strip()]
    if not names:
        raise UsageError("empty method list")
    return tuple(_spec(parse_method(n), args) for n in names)


def _mos_scale(raw: Optional[str]) -> Optional[Tuple[float, float]]:
    if raw is None:
        return None
    parts = raw.split(",")
    try:
        low, high = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"--mos-scale expects 'low,high', got {raw!r}") from None
    return low, high


def _build(args: Dict[str, object]) -> CliConfig:
    command = next(c for c in COMMANDS if args.get(c))
    pooling_set = (
        _spec_list(args["pooling-set"], args) if args.get("pooling-set") else
        tuple(_spec(s.method, args) for s in default_pooling_set())
    )
    common = dict(
        command=command,
        scores_path=args.get("scores"),
        features_path=args.get("features"),
        out_path=args.get("out"),
        pooling_set=pooling_set,
        nested=bool(args["nested"]),
        seed=_value(args, "seed", int, cfg.SEED),
        workers=_value(args, "workers", int, cfg.WORKERS),
        frame_stride=_value(args, "frame-stride", int, cfg.FRAME_STRIDE),
        higher_is_better=not args["lower-is-better"],
    )
    if common["seed"] < 0:
        raise UsageError(f"--seed must be nonnegative, got {common['seed']}")
    if common["workers"] < 1:
        raise UsageError(f"--workers must be positive, got {common['workers']}")
    if common["frame_stride"] < 1:
        raise UsageError(f"--frame-stride must be positive, got {common['frame_stride']}")

    if command == "pool":
        return CliConfig(
            scores_path=args["<scores_csv>"],
            pool_spec=_spec(parse_method(args["method"]), args),
            **{k: v for k, v in common.items() if k != "scores_path"},
        )

    if command == "evaluate":
        raw = args["methods"] or "all"
        if raw.strip().lower() == "all":
            methods: Tuple[EvalMethod, ...] = tuple(_spec(s.method, args) for s in all_methods())
        else:
            methods = _spec_list(raw, args)
        if args["epooling"]:
            methods += (EPoolingConfig(pooling_set, nested=bool(args["nested"])),)
        fmt = args["format"]
        if fmt not in ("markdown", "csv"):
            raise UsageError(f"--format must be markdown or csv, got {fmt!r}")
        trials = _value(args, "trials", int, cfg.TRIALS)
        if trials < 1:
            raise UsageError(f"--trials must be positive, got {trials}")
        return CliConfig(
            mos_path=args["<mos_csv>"],
            report_format=fmt,
            methods=methods,
            trials=trials,
            train_fraction=_value(args, "train-fraction", float, cfg.TRAIN_FRACTION),
            mos_scale=_mos_scale(args.get("mos-scale")),
            **common,
        )

    if command == "ensemble-train":
        return CliConfig(
            mos_path=args["<mos_csv>"],
            model_path=args["model"],
            mos_scale=_mos_scale(args.get("mos-scale")),
            **common,
        )

    if command == "ensemble-predict":
        return CliConfig(model_path=args["<model_path>"], **common)

    synth = SynthSpec(
        n_videos=_value(args, "videos", int, 100),
        frames_per_video=_value(args, "frames", int, 150),
        mos_rule=args["mos-rule"],
        noise_sd=_value(args, "noise-sd", float, 0.1),
        seed=common["seed"],
        feature_dim=_value(args, "feature-dim", int, 0),
    )
    synth.validate()
    return CliConfig(out_prefix=args["<out_prefix>"], synth=synth, **common)


def parse_cli(argv: Optional[Sequence[str]] = None) -> CliConfig:
    _args = docopt(__doc__, argv=argv)
    args = {k.replace("--", ""): v for k, v in _args.items()}
    try:
        return _build(args)
    except DATA_ERRORS as e:
        # bad flag values are usage errors, not data errors
        raise UsageError(str(e)) from e


def _emit(text: str, out_path: Optional[str]) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        click.echo(text, nl=False)


def _dataset(config: CliConfig) -> Dataset:
    fragments = [load_mos(config.mos_path)]
    if config.scores_path:
        fragments.append(load_frame_scores(config.scores_path))
    if config.features_path:
        fragments.append(load_features(config.features_path))
    dataset = assemble_dataset(fragments, config.mos_scale, config.higher_is_better)
    tp_print.info(f"Loaded {len(dataset)} videos")
    return dataset


def cmd_pool(config: CliConfig) -> None:
    fragment = load_frame_scores(config.scores_path)
    lines: List[str] = []
    for vid, scores in fragment.values.items():
        try:
            value = pool(scores, config.pool_spec)
        except PoolingDomainError as e:
            raise PoolingDomainError(str(e), vid) from e
        lines.append(f"{vid},{value!r}\n")
    _emit("".join(lines), config.out_path)
    tp_print.info(f"Pooled {len(lines)} videos with {config.pool_spec.label}")


def cmd_evaluate(config: CliConfig) -> None:
    dataset = _dataset(config)
    tp_print.info(
        f"Evaluating {len(config.methods)} methods over {config.trials} trials (seed {config.seed})"
    )
    report = run_pooling_evaluation(
        dataset,
        config.methods,
        trials=config.trials,
        seed=config.seed,
        train_fraction=config.train_fraction,
        workers=config.workers,
        frame_stride=config.frame_stride,
    )
    _emit(emit_report(report, config.report_format), config.out_path)


def cmd_ensemble_train(config: CliConfig) -> None:
    dataset = _dataset(config)
    ids = dataset.ids
    if config.scores_path:
        model = epooling_train(
            [r.frame_scores for r in dataset.records],
            dataset.mos,
            config.pooling_set,
            seed=config.seed,
            video_ids=ids,
            workers=config.workers,
        )
    else:
        model = epooling_train_from_features(
            [r.frame_features for r in dataset.records],
            dataset.mos,
            config.pooling_set,
            seed=config.seed,
            nested=config.nested,
            video_ids=ids,
            frame_stride=config.frame_stride,
            workers=config.workers,
        )
    write_ensemble(config.model_path, model)
    tp_print.success(f"Wrote EPooling model over {', '.join(s.label for s in model.pooling_set)} to {config.model_path}")


def _predict_all(model: EnsembleModel, config: CliConfig) -> List[Tuple[str, float]]:
    if config.scores_path:
        fragment = load_frame_scores(config.scores_path)
        return [(vid, epooling_predict(model, s, vid)) for vid, s in fragment.values.items()]
    fragment = load_features(config.features_path)
    return [(vid, epooling_predict_from_features(model, f, vid)) for vid, f in fragment.values.items()]


def cmd_ensemble_predict(config: CliConfig) -> None:
    model = read_ensemble(config.model_path)
    predictions = _predict_all(model, config)
    _emit("".join(f"{vid},{value!r}\n" for vid, value in predictions), config.out_path)
    tp_print.info(f"Predicted {len(predictions)} videos")


def cmd_synth(config: CliConfig) -> None:
    dataset = synth_generate(config.synth)
    prefix = config.out_prefix
    write_frame_scores(f"{prefix}_scores.csv", frame_score_table(dataset))
    write_mos(f"{prefix}_mos.csv", mos_table(dataset))
    written = [f"{prefix}_scores.csv", f"{prefix}_mos.csv"]
    if config.synth.feature_dim:
        write_features(f"{prefix}_features.csv", feature_table(dataset))
        written.append(f"{prefix}_features.csv")
    tp_print.success(f"Wrote {', '.join(written)}")


_HANDLERS = {
    "pool": cmd_pool,
    "evaluate": cmd_evaluate,
    "ensemble-train": cmd_ensemble_train,
    "ensemble-predict": cmd_ensemble_predict,
    "synth": cmd_synth,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    tp_print.reset_errors()
    try:
        config = parse_cli(argv)
    except DocoptExit as e:
        click.echo(str(e), err=True)
        return 1
    except SystemExit as e:
        # --help
        return 0 if e.code in (None, 0) else 1
    except UsageError as e:
        tp_print.error(f"Usage error: {e}")
        return 1

    try:
        _HANDLERS[config.command](config)
    except (CsvParseError, ModelFormatError, FileNotFoundError, UsageError) as e:
        tp_print.error(f"Parse error: {e}")
        return 1
    except DATA_ERRORS as e:
        tp_print.error(f"Data error: {e}", element=getattr(e, "video_id", None))
        return 2
    except Exception as e:  # pylint: disable=broad-except
        tp_print.error(f"Internal error: {e!r}")
        return 3

    tp_print.summary(config.command)
    return 2 if tp_print.GLOBAL_ERROR_COUNT else 0


if __name__ == "__main__":
    raise SystemExit(main())
