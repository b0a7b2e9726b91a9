"""Confusion-matrix scoring of verdict streams and feature diagnostics.

Convention: the positive class is Healthy. tp counts healthy windows detected
healthy, tn damaged windows detected damaged, fp damaged windows detected
healthy (a missed damage), fn healthy windows detected damaged (a false
alarm). Any 0/0 ratio is reported as undefined (None), never as 0 or 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, LengthMismatch
from .gauss import Label, TrainingMatrix, Verdict
from .signal import FEATURE_NAMES


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tp=self.tp + other.tp,
            tn=self.tn + other.tn,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
        )


@dataclass(frozen=True)
class EvalReport:
    """The six performance measures; None marks an undefined (0/0) ratio."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f_score: float | None
    type1_error: float | None
    type2_error: float | None


def _as_label(value) -> Label:
    if isinstance(value, Verdict):
        return value.label
    if isinstance(value, Label):
        return value
    return Label(value)


def confusion(verdicts, truth) -> ConfusionMatrix:
    """Count verdicts against ground truth, aligned by position."""
    if len(verdicts) != len(truth):
        raise LengthMismatch(
            f"{len(verdicts)} verdicts vs {len(truth)} truth labels"
        )
    tp = tn = fp = fn = 0
    for v, t in zip(verdicts, truth):
        predicted = _as_label(v)
        actual = _as_label(t)
        if actual is Label.HEALTHY:
            if predicted is Label.HEALTHY:
                tp += 1
            else:
                fn += 1
        else:
            if predicted is Label.DAMAGED:
                tn += 1
            else:
                fp += 1
    return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)


def metrics(cm: ConfusionMatrix) -> EvalReport:
    """Derive the six measures from a confusion matrix."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix holds no windows")

    def ratio(num: int, den: int) -> float | None:
        return num / den if den > 0 else None

    precision = ratio(cm.tp, cm.tp + cm.fp)
    recall = ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None or precision + recall == 0.0:
        f_score = None
    else:
        f_score = 2.0 * precision * recall / (precision + recall)
    return EvalReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=precision,
        recall=recall,
        f_score=f_score,
        type1_error=ratio(cm.fp, cm.fp + cm.tn),
        type2_error=ratio(cm.fn, cm.fn + cm.tp),
    )


@dataclass(frozen=True)
class FeatureSummary:
    """Distribution summary of one feature column across training windows."""

    name: str
    mean: float
    std: float
    minimum: float
    maximum: float
    deciles: tuple[float, ...]  # order statistics at 10%, 20%, ..., 100%


def export_feature_diagnostics(X: TrainingMatrix) -> list[FeatureSummary]:
    """Per-feature summary table for external plotting or normality checks.

    Deciles are plain order statistics: the k-th decile of t sorted values is
    the element at rank ceil(k * t / 10), so the 10th decile is the maximum.
    """
    data = X.X
    t, m = data.shape
    names = FEATURE_NAMES if m == len(FEATURE_NAMES) else tuple(
        f"f{j + 1}" for j in range(m)
    )
    out = []
    for j in range(m):
        col = np.sort(data[:, j])
        ranks = [min(t, math.ceil(k * t / 10)) for k in range(1, 11)]
        out.append(
            FeatureSummary(
                name=names[j],
                mean=float(np.mean(col)),
                std=float(np.std(col)),
                minimum=float(col[0]),
                maximum=float(col[-1]),
                deciles=tuple(float(col[rank - 1]) for rank in ranks),
            )
        )
    return out
