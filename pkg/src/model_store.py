"""
Versioned plain-text formats for trained models.

Floats are written with repr(), which round-trips every double exactly, so a model
read back predicts bit-identically to the one that was written.
"""

from __future__ import annotations

from typing import Dict, List

import numpy as np

from epooling import EnsembleModel
from svr import FeatureScaler, SvrModel
from temporal_pooling import METHOD_PARAMS, PoolingSpec, parse_method
from tools.errors import InvalidParameterError, ModelFormatError

SVR_HEADER = "tpool-svr 1"
ENSEMBLE_HEADER = "tpool-epooling 1"

_INT_PARAMS = ("L", "tau")
_BOOL_PARAMS = ("higher_is_better", "negate")


def _num(v: float) -> str:
    return repr(float(v))


def _row(values) -> str:
    return " ".join(_num(v) for v in values)


class _Lines:
    def __init__(self, text: str, source: str):
        self.lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        self.pos = 0
        self.source = source

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise ModelFormatError(f"{self.source}: unexpected end of model")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, key: str) -> List[str]:
        parts = self.next().split()
        if not parts or parts[0] != key:
            raise ModelFormatError(f"{self.source}: expected '{key}' at line {self.pos}, got {' '.join(parts)!r}")
        return parts[1:]

    def expect_header(self, header: str) -> None:
        line = self.next() if self.lines else ""
        if line != header:
            raise ModelFormatError(f"{self.source}: unsupported model header {line!r} (expected {header!r})")


def _floats(parts: List[str], source: str) -> List[float]:
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise ModelFormatError(f"{source}: bad number: {e}") from None


def _single(parts: List[str], source: str) -> float:
    values = _floats(parts, source)
    if len(values) != 1:
        raise ModelFormatError(f"{source}: expected one value, got {len(values)}")
    return values[0]


def dump_svr(model: SvrModel) -> str:
    out = [
        SVR_HEADER,
        f"dimension {model.dimension}",
        f"C {_num(model.C)}",
        f"gamma {_num(model.gamma)}",
        f"epsilon {_num(model.epsilon)}",
        f"bias {_num(model.bias)}",
        f"converged {int(model.converged)}",
        f"iterations {model.iterations}",
        f"scaler_mean {_row(model.scaler.means)}",
        f"scaler_std {_row(model.scaler.stds)}",
        f"support_vectors {model.dual_coefficients.size}",
    ]
    for coef, sv in zip(model.dual_coefficients, model.support_vectors):
        out.append(f"sv {_num(coef)} {_row(sv)}")
    return "\n".join(out) + "\n"


def _read_svr(lines: _Lines) -> SvrModel:
    src = lines.source
    lines.expect_header(SVR_HEADER)
    dimension = int(_single(lines.expect("dimension"), src))
    C = _single(lines.expect("C"), src)
    gamma = _single(lines.expect("gamma"), src)
    epsilon = _single(lines.expect("epsilon"), src)
    bias = _single(lines.expect("bias"), src)
    converged = bool(int(_single(lines.expect("converged"), src)))
    iterations = int(_single(lines.expect("iterations"), src))
    means = np.array(_floats(lines.expect("scaler_mean"), src))
    stds = np.array(_floats(lines.expect("scaler_std"), src))
    if means.size != dimension or stds.size != dimension:
        raise ModelFormatError(f"{src}: scaler does not match dimension {dimension}")
    count = int(_single(lines.expect("support_vectors"), src))

    coefs, vectors = [], []
    for _ in range(count):
        values = _floats(lines.expect("sv"), src)
        if len(values) != dimension + 1:
            raise ModelFormatError(f"{src}: support vector of arity {len(values) - 1}, expected {dimension}")
        coefs.append(values[0])
        vectors.append(values[1:])

    return SvrModel(
        support_vectors=np.array(vectors, dtype=float).reshape(count, dimension),
        dual_coefficients=np.array(coefs, dtype=float),
        bias=bias,
        gamma=gamma,
        scaler=FeatureScaler(means=means, stds=stds),
        C=C,
        epsilon=epsilon,
        converged=converged,
        iterations=iterations,
    )


def load_svr(text: str, source: str = "<svr>") -> SvrModel:
    return _read_svr(_Lines(text, source))


def _spec_tokens(spec: PoolingSpec) -> str:
    parts = [spec.method.value]
    for key, value in spec.params().items():
        if key in _BOOL_PARAMS or key in _INT_PARAMS:
            parts.append(f"{key}={int(value)}")
        else:
            parts.append(f"{key}={_num(value)}")
    return " ".join(parts)


def _parse_spec(parts: List[str], source: str) -> PoolingSpec:
    if not parts:
        raise ModelFormatError(f"{source}: empty pooling entry")
    kwargs: Dict[str, object] = {}
    try:
        method = parse_method(parts[0])
        for token in parts[1:]:
            key, _, raw = token.partition("=")
            if key not in METHOD_PARAMS[method]:
                raise ModelFormatError(f"{source}: parameter {key!r} does not apply to {method.value}")
            if key in _BOOL_PARAMS:
                kwargs[key] = bool(int(raw))
            elif key in _INT_PARAMS:
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        return PoolingSpec(method, **kwargs)
    except (InvalidParameterError, ValueError) as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f"{source}: bad pooling entry {' '.join(parts)!r}: {e}") from None


def _block(name: str, body: str) -> List[str]:
    return [f"begin {name}", body.rstrip("\n"), f"end {name}"]


def _read_block(lines: _Lines, name: str) -> SvrModel:
    if lines.expect("begin") != [name]:
        raise ModelFormatError(f"{lines.source}: expected block '{name}' at line {lines.pos}")
    model = _read_svr(lines)
    if lines.expect("end") != [name]:
        raise ModelFormatError(f"{lines.source}: unterminated block '{name}'")
    return model


def dump_ensemble(model: EnsembleModel) -> str:
    out = [
        ENSEMBLE_HEADER,
        f"seed {model.seed}",
        f"fingerprint {model.fingerprint}",
        f"nested {int(model.nested)}",
        f"pooling_set {len(model.pooling_set)}",
    ]
    out += [f"pooling {_spec_tokens(spec)}" for spec in model.pooling_set]
    out.append(f"frame_predictor {int(model.frame_predictor is not None)}")
    out += _block("fusion", dump_svr(model.fusion_regressor))
    if model.frame_predictor is not None:
        out += _block("frame_predictor", dump_svr(model.frame_predictor))
    return "\n".join(out) + "\n"


def load_ensemble(text: str, source: str = "<ensemble>") -> EnsembleModel:
    lines = _Lines(text, source)
    lines.expect_header(ENSEMBLE_HEADER)
    seed = int(_single(lines.expect("seed"), source))
    fingerprint = " ".join(lines.expect("fingerprint"))
    nested = bool(int(_single(lines.expect("nested"), source)))
    count = int(_single(lines.expect("pooling_set"), source))
    pooling_set = tuple(_parse_spec(lines.expect("pooling"), source) for _ in range(count))
    has_predictor = bool(int(_single(lines.expect("frame_predictor"), source)))
    fusion = _read_block(lines, "fusion")
    frame_predictor = _read_block(lines, "frame_predictor") if has_predictor else None
    if fusion.dimension != len(pooling_set):
        raise ModelFormatError(f"{source}: fusion regressor expects {fusion.dimension} inputs, pooling set has {count}")
    return EnsembleModel(
        pooling_set=pooling_set,
        fusion_regressor=fusion,
        seed=seed,
        fingerprint=fingerprint,
        frame_predictor=frame_predictor,
        nested=nested,
    )


def write_ensemble(path: str, model: EnsembleModel) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dump_ensemble(model))


def read_ensemble(path: str) -> EnsembleModel:
    with open(path, "r", encoding="utf-8") as f:
        return load_ensemble(f.read(), source=path)
