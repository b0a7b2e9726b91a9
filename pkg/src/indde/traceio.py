"""Trace CSV files and the delimiter-separated outputs written by the CLI.

Trace format: one acceleration value per row (optionally preceded by a
timestamp column), an optional header row, and '#' comment lines. The
sampling frequency comes from a ``# freq_hz: <value>`` comment unless an
explicit override wins.

All floats in emitted files use 9 significant digits so outputs diff cleanly
across runs.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import MissingFrequency, NonFiniteValue, ParseError
from .evalkit import ConfusionMatrix, EvalReport
from .gauss import Label, Verdict
from .signal import AccelTrace
from .simnet import LabelSpan, NodeTraffic


def fmt(x: float) -> str:
    """Render a float with 9 significant digits."""
    return "%.9g" % x


def fmt_opt(x: float | None) -> str:
    return "undefined" if x is None else fmt(x)


def _comment_kv(line: str) -> tuple[str, str] | None:
    body = line.lstrip("#").strip()
    for sep in (":", "="):
        if sep in body:
            key, value = body.split(sep, 1)
            return key.strip(), value.strip()
    return None


def load_csv(path, freq_override: float | None = None) -> AccelTrace:
    """Load an acceleration trace from a CSV file.

    The frequency override (command-line flag) takes precedence over any
    ``freq_hz`` header comment. Non-numeric rows are rejected with their line
    number; one leading header row is tolerated.
    """
    path = Path(path)
    freq = None
    node_id = path.stem
    samples: list[float] = []
    saw_data = False
    skipped_header = False

    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                kv = _comment_kv(line)
                if kv is None:
                    continue
                key, value = kv
                if key == "freq_hz":
                    try:
                        freq = float(value)
                    except ValueError:
                        raise ParseError(lineno, f"bad freq_hz comment: {value!r}")
                elif key == "node_id":
                    node_id = value
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) > 2:
                raise ParseError(lineno, "expected at most two columns")
            try:
                values = [float(f) for f in fields]
            except ValueError:
                if not saw_data and not skipped_header:
                    skipped_header = True
                    continue
                raise ParseError(lineno, f"not a number: {line!r}")
            value = values[-1]  # acceleration is the last column
            if not math.isfinite(value):
                raise NonFiniteValue(lineno)
            samples.append(value)
            saw_data = True

    if freq_override is not None:
        freq = freq_override
    if freq is None:
        raise MissingFrequency(
            "no freq_hz header comment and no frequency given on the command line"
        )
    if not samples:
        raise ParseError(0, "file contains no samples")
    return AccelTrace(samples=np.array(samples), freq=freq, node_id=node_id)


def write_trace_csv(trace: AccelTrace, path) -> None:
    """Write a trace in the format load_csv reads, at full float precision."""
    lines = [
        f"# freq_hz: {repr(float(trace.freq))}",
        f"# node_id: {trace.node_id}",
        "acceleration",
    ]
    lines.extend(repr(float(v)) for v in trace.samples)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- label schedules -------------------------------------------------------------

def write_schedule(schedule, path) -> None:
    lines = ["start_s,end_s,label"]
    lines.extend(f"{fmt(s.start_s)},{fmt(s.end_s)},{s.label.value}" for s in schedule)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_schedule(path) -> list[LabelSpan]:
    spans = []
    for lineno, line in enumerate(_data_lines(path), start=1):
        if lineno == 1 and line.startswith("start_s"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(lineno, "expected start_s,end_s,label")
        spans.append(
            LabelSpan(float(parts[0]), float(parts[1]), Label(parts[2].strip()))
        )
    return spans


# -- verdict / truth files ---------------------------------------------------------

def verdict_line(v: Verdict, include_node: bool = False) -> str:
    flags = "degenerate" if v.degenerate else "-"
    core = f"{v.window_index},{fmt(v.log_density)},{v.label.value},{flags}"
    return f"{v.node_id},{core}" if include_node else core


def write_verdicts(verdicts, path, include_node: bool = False) -> None:
    header = "window_index,log_density,label,flags"
    if include_node:
        header = "node_id," + header
    lines = [header]
    lines.extend(verdict_line(v, include_node) for v in verdicts)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_verdicts(path) -> list[Verdict]:
    verdicts = []
    for lineno, line in enumerate(_data_lines(path), start=1):
        parts = [p.strip() for p in line.split(",")]
        if lineno == 1 and parts[0] in ("window_index", "node_id"):
            continue
        node_id = ""
        if len(parts) == 5:
            node_id, parts = parts[0], parts[1:]
        if len(parts) != 4:
            raise ParseError(lineno, "expected window_index,log_density,label,flags")
        try:
            verdicts.append(
                Verdict(
                    window_index=int(parts[0]),
                    log_density=float(parts[1]),
                    label=Label(parts[2]),
                    node_id=node_id,
                    degenerate=parts[3] == "degenerate",
                )
            )
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from exc
    return verdicts


def write_truth(labels, path) -> None:
    lines = ["window_index,label"]
    lines.extend(f"{i},{label.value}" for i, label in enumerate(labels))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_truth(path) -> list[Label]:
    labels = []
    for lineno, line in enumerate(_data_lines(path), start=1):
        parts = [p.strip() for p in line.split(",")]
        if lineno == 1 and parts[0] == "window_index":
            continue
        try:
            labels.append(Label(parts[-1]))
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from exc
    return labels


# -- ledger / report files ----------------------------------------------------------

LEDGER_HEADER = (
    "node_id,raw_samples_monitored,verdict_messages_sent,"
    "centralized_equivalent_samples,verdict_bytes,raw_bytes"
)


def ledger_line(row: NodeTraffic) -> str:
    return (
        f"{row.node_id},{row.raw_samples_monitored},{row.verdict_messages_sent},"
        f"{row.centralized_equivalent_samples},{row.verdict_bytes},{row.raw_bytes}"
    )


def write_ledger(rows, path) -> None:
    lines = [LEDGER_HEADER]
    lines.extend(ledger_line(r) for r in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


REPORT_HEADER = (
    "node_id,tp,tn,fp,fn,accuracy,precision,recall,f_score,type1_error,type2_error"
)


def report_line(node_id: str, cm: ConfusionMatrix, rep: EvalReport | None) -> str:
    if rep is None:
        tail = ",".join(["undefined"] * 6)
    else:
        tail = ",".join(
            fmt_opt(v)
            for v in (
                rep.accuracy,
                rep.precision,
                rep.recall,
                rep.f_score,
                rep.type1_error,
                rep.type2_error,
            )
        )
    return f"{node_id},{cm.tp},{cm.tn},{cm.fp},{cm.fn},{tail}"


def write_report(rows, path) -> None:
    """Write per-node report rows; ``rows`` yields (node_id, cm, report)."""
    lines = [REPORT_HEADER]
    lines.extend(report_line(node_id, cm, rep) for node_id, cm, rep in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _data_lines(path):
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            yield line
