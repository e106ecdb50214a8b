"""Table-style rendering of an EvalReport, as markdown or full-precision CSV."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Set, Tuple

from protocol import EvalReport, MethodSummary, TrialResult
from tools.errors import InvalidParameterError, ModelFormatError

SUMMARY_HEADER = ["method", "median_srcc", "median_plcc", "trials"]
TRIAL_HEADER = ["method", "trial", "seed", "srcc", "plcc"]
TOP_K = 3


def _num(v: float) -> str:
    return repr(float(v))


def top_methods(summaries: Sequence[MethodSummary], component: str, k: int = TOP_K) -> Set[str]:
    """The k best methods on one component; equal values keep the listed order"""
    usable = [(s, getattr(s, component)) for s in summaries if not math.isnan(getattr(s, component))]
    ranked = sorted(range(len(usable)), key=lambda i: (-usable[i][1], i))
    return {usable[i][0].method for i in ranked[:k]}


def _cell(value: float, bold: bool) -> str:
    if math.isnan(value):
        return "n/a"
    text = f"{value:.3f}"
    return f"**{text}**" if bold else text


def emit_markdown(report: EvalReport) -> str:
    best_srcc = top_methods(report.summaries, "median_srcc")
    best_plcc = top_methods(report.summaries, "median_plcc")
    out = [
        f"Median SRCC / PLCC over {report.trials} trials "
        f"(seed {report.seed}, train fraction {report.train_fraction:g}); "
        f"the {TOP_K} best of each are in bold.",
        "",
        "| Method | SRCC / PLCC |",
        "|---|---|",
    ]
    for s in report.summaries:
        if s.failed:
            out.append(f"| {s.method} | failed |")
            continue
        srcc_cell = _cell(s.median_srcc, s.method in best_srcc)
        plcc_cell = _cell(s.median_plcc, s.method in best_plcc)
        out.append(f"| {s.method} | {srcc_cell} / {plcc_cell} |")
    return "\n".join(out) + "\n"


def emit_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for s in report.summaries:
        writer.writerow([s.method, _num(s.median_srcc), _num(s.median_plcc), s.trials])
    buf.write("\n")
    writer.writerow(TRIAL_HEADER)
    for r in report.results:
        writer.writerow([r.method, r.trial, r.seed, _num(r.srcc), _num(r.plcc)])
    return buf.getvalue()


def emit_report(report: EvalReport, fmt: str = "markdown") -> str:
    if fmt == "markdown":
        return emit_markdown(report)
    if fmt == "csv":
        return emit_csv(report)
    raise InvalidParameterError(f"unknown report format {fmt!r} (expected markdown or csv)")


@dataclass
class ParsedReport:
    medians: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    trials: Dict[str, int] = field(default_factory=dict)
    rows: List[TrialResult] = field(default_factory=list)

    def recomputed_medians(self) -> Dict[str, Tuple[float, float]]:
        report = EvalReport(
            tuple(self.medians),
            tuple(self.rows),
            max(self.trials.values(), default=0),
            0,
            0.0,
        )
        return report.recomputed_medians()


def parse_report_csv(text: str) -> ParsedReport:
    parsed = ParsedReport()
    section = None
    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row:
            continue
        if row == SUMMARY_HEADER or row == TRIAL_HEADER:
            section = row
            continue
        try:
            if section == SUMMARY_HEADER:
                method, s, p, n = row
                parsed.medians[method] = (float(s), float(p))
                parsed.trials[method] = int(n)
            elif section == TRIAL_HEADER:
                method, t, seed, s, p = row
                s, p = float(s), float(p)
                error = "failed" if math.isnan(s) else None
                plcc_error = "undefined" if error is None and math.isnan(p) else None
                parsed.rows.append(TrialResult(method, int(t), int(seed), s, p, error, plcc_error))
            else:
                raise ValueError("row before any header")
        except ValueError as e:
            raise ModelFormatError(f"report line {line_no}: {e}") from None
    return parsed
