"""Windowing of acceleration traces and per-window time-domain statistics.

A trace is cut into tumbling (non-overlapping, fixed-length) windows and each
window is reduced to seven statistics:

    mean, mean square, variance, standard deviation,
    skewness, kurtosis, crest factor

All moments use population normalization (divide by the window length r).
Skewness and kurtosis are the central third/fourth moments normalized by
sigma^3 / sigma^4; kurtosis is raw (Gaussian data gives ~3). The crest factor
is max(|d|) / RMS, so it is always >= 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindow, EmptyTrace, FrequencyMismatch, ZeroSignal

FEATURE_NAMES = (
    "mean",
    "mean_square",
    "variance",
    "std_dev",
    "skewness",
    "kurtosis",
    "crest_factor",
)
NUM_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class AccelTrace:
    """A uniformly sampled acceleration signal from one sensor node.

    Units are whatever the sensor produced (m/s^2 or g) as long as they are
    uniform; ``freq`` is the sampling frequency in Hz.
    """

    samples: np.ndarray
    freq: float
    node_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if not self.freq > 0:
            raise ValueError("sampling frequency must be positive")
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite (no NaN/Inf)")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.freq


@dataclass(frozen=True)
class WindowSpec:
    """A fixed-duration tumbling window over a trace of matching frequency."""

    duration_s: float
    freq: float

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("window duration must be positive")
        if not self.freq > 0:
            raise ValueError("sampling frequency must be positive")
        if self.size < 2:
            raise ValueError("window must span at least two samples")

    @property
    def size(self) -> int:
        """Samples per window (r)."""
        return int(round(self.duration_s * self.freq))


@dataclass(frozen=True)
class FeatureVector:
    """The seven statistics of one window, in fixed order."""

    mean: float
    mean_square: float
    variance: float
    std_dev: float
    skewness: float
    kurtosis: float
    crest_factor: float
    window_index: int = 0

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.mean,
                self.mean_square,
                self.variance,
                self.std_dev,
                self.skewness,
                self.kurtosis,
                self.crest_factor,
            ],
            dtype=np.float64,
        )


def window_count(n_samples: int, spec: WindowSpec) -> int:
    """Number of full windows in a trace of ``n_samples``."""
    return int(n_samples) // spec.size


def segment(trace: AccelTrace, spec: WindowSpec) -> tuple[np.ndarray, int]:
    """Cut ``trace`` into consecutive full windows of ``spec.size`` samples.

    Returns ``(windows, discarded)`` where ``windows`` is an (n, r) view over
    the trace in chronological order and ``discarded`` counts the trailing
    samples that did not fill a final window.
    """
    if trace.freq != spec.freq:
        raise FrequencyMismatch(
            f"trace sampled at {trace.freq} Hz, window expects {spec.freq} Hz"
        )
    r = spec.size
    k = len(trace)
    if k < r:
        raise EmptyTrace(f"trace has {k} samples, one window needs {r}")
    n = k // r
    windows = trace.samples[: n * r].reshape(n, r)
    return windows, k - n * r


def compute_features(window: np.ndarray, window_index: int = 0) -> FeatureVector:
    """Compute the seven statistics of one window.

    Accumulates power sums of ``d - d[0]`` (a single pass over the data) and
    recovers the central moments algebraically; pivoting on the first sample
    keeps the sums small and avoids the catastrophic cancellation a raw
    sum-of-powers accumulator suffers on offset signals.

    Raises DegenerateWindow when the window is constant (sigma = 0) and
    ZeroSignal when the mean square vanishes with sigma > 0 (unreachable for
    real inputs, kept as a guard).
    """
    d = np.asarray(window, dtype=np.float64)
    if d.ndim != 1 or d.size < 2:
        raise ValueError("window must hold at least two samples")
    if not np.all(np.isfinite(d)):
        raise ValueError("window samples must be finite")
    r = d.size

    pivot = d[0]
    e = d - pivot
    e2 = e * e
    e3 = e2 * e
    p1 = float(e.sum()) / r
    p2 = float(e2.sum()) / r
    p3 = float(e3.sum()) / r
    p4 = float((e3 * e).sum()) / r
    peak = float(np.abs(d).max())

    mean = float(pivot) + p1
    variance = p2 - p1 * p1
    if variance < 0.0:  # rounding can push an exact zero slightly negative
        variance = 0.0
    mean_square = variance + mean * mean
    std_dev = math.sqrt(variance)
    if std_dev == 0.0:
        raise DegenerateWindow("constant window: standard deviation is zero")
    if mean_square == 0.0:
        raise ZeroSignal("zero-power window: crest factor undefined")

    mu3 = p3 - 3.0 * p1 * p2 + 2.0 * p1 ** 3
    mu4 = p4 - 4.0 * p1 * p3 + 6.0 * p1 * p1 * p2 - 3.0 * p1 ** 4
    return FeatureVector(
        mean=mean,
        mean_square=mean_square,
        variance=variance,
        std_dev=std_dev,
        skewness=mu3 / (std_dev * variance),
        kurtosis=mu4 / (variance * variance),
        crest_factor=peak / math.sqrt(mean_square),
        window_index=window_index,
    )
