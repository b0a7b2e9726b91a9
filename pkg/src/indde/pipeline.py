"""Per-node workflow: train a health model, then stream verdicts.

Training segments a healthy trace, computes features per window, splits the
windows chronologically (the leading fraction fits the Gaussian, the rest
calibrates the threshold; a time series must never validate on data that
precedes the fit data), and returns a calibrated model.

Detection buffers raw samples and emits one verdict per full window. A
degenerate window (flatlined sensor) during detection is classified Damaged
with a flag rather than raising: a silent accelerometer is an anomaly to
surface, not a crash.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CorruptModel,
    DegenerateWindow,
    EmptyTrace,
    NonFiniteSample,
    TooFewWindows,
    UncalibratedModel,
    VersionMismatch,
    ZeroSignal,
)
from .gauss import (
    DEFAULT_MARGIN_LOG,
    DEFAULT_QUANTILE,
    GaussianModel,
    Label,
    TrainingMatrix,
    Verdict,
    build_model,
    calibrate_threshold,
    classify,
    fit,
)
from .signal import NUM_FEATURES, AccelTrace, WindowSpec, compute_features, segment

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the training phase of one node."""

    window: WindowSpec
    train_fraction: float = 0.75
    ridge_lambda: float | None = None
    quantile: float = DEFAULT_QUANTILE
    margin_log: float = DEFAULT_MARGIN_LOG
    min_train_windows: int = NUM_FEATURES + 2

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.min_train_windows < NUM_FEATURES + 2:
            raise ValueError(
                f"min_train_windows must be at least {NUM_FEATURES + 2} "
                "(full-rank fit plus one validation window)"
            )


@dataclass(frozen=True)
class TrainResult:
    """Calibrated model plus the bookkeeping the caller reports.

    ``fit_matrix`` holds the exact feature rows the Gaussian was fitted on,
    for diagnostics export.
    """

    model: GaussianModel
    fit_matrix: TrainingMatrix
    fit_windows: int
    validation_windows: int
    skipped_degenerate: int
    discarded_samples: int


def train(healthy: AccelTrace, cfg: TrainConfig) -> TrainResult:
    """Run the full training phase on a healthy-state trace."""
    try:
        windows, discarded = segment(healthy, cfg.window)
    except EmptyTrace as exc:
        raise TooFewWindows(str(exc)) from exc

    features = []
    skipped = 0
    for i, w in enumerate(windows):
        try:
            features.append(compute_features(w, window_index=i))
        except (DegenerateWindow, ZeroSignal):
            skipped += 1
    n = len(features)
    if n < cfg.min_train_windows:
        raise TooFewWindows(
            f"{n} usable windows, need at least {cfg.min_train_windows}"
        )
    n_fit = int(n * cfg.train_fraction)
    n_val = n - n_fit
    if n_fit < NUM_FEATURES + 1 or n_val < 1:
        raise TooFewWindows(
            f"split {n_fit}/{n_val} leaves too few windows for fit or validation"
        )

    fit_matrix = TrainingMatrix.from_features(features[:n_fit])
    model = fit(fit_matrix, cfg.ridge_lambda)
    model = calibrate_threshold(
        model,
        TrainingMatrix.from_features(features[n_fit:]),
        quantile=cfg.quantile,
        margin_log=cfg.margin_log,
    )
    model = replace(model, window_spec=cfg.window)
    return TrainResult(
        model=model,
        fit_matrix=fit_matrix,
        fit_windows=n_fit,
        validation_windows=n_val,
        skipped_degenerate=skipped,
        discarded_samples=discarded,
    )


class DetectorState:
    """Streaming detector for one node; single writer, one verdict per window."""

    def __init__(self, model: GaussianModel, node_id: str = ""):
        if model.epsilon_log is None:
            raise UncalibratedModel("detector needs a calibrated model")
        if model.window_spec is None:
            raise ValueError("model carries no window spec")
        self.model = model
        self.node_id = node_id
        self._buffer = np.empty(model.window_spec.size, dtype=np.float64)
        self._fill = 0
        self.windows_emitted = 0
        self.samples_ingested = 0

    @property
    def window_size(self) -> int:
        return int(self._buffer.size)

    @property
    def buffered(self) -> int:
        """Samples waiting for the current window to fill."""
        return self._fill

    def ingest(self, sample: float) -> Verdict | None:
        """Buffer one sample; returns a verdict when it completes a window."""
        value = float(sample)
        if not math.isfinite(value):
            raise NonFiniteSample(f"sample {self.samples_ingested} is not finite")
        self._buffer[self._fill] = value
        self._fill += 1
        self.samples_ingested += 1
        if self._fill < self._buffer.size:
            return None
        return self._emit()

    def ingest_many(self, samples) -> list[Verdict]:
        """Bulk equivalent of repeated ingest(); returns the emitted verdicts."""
        arr = np.asarray(samples, dtype=np.float64).reshape(-1)
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise NonFiniteSample(
                f"sample {self.samples_ingested + int(bad[0])} is not finite"
            )
        verdicts = []
        pos = 0
        r = self._buffer.size
        while pos < arr.size:
            take = min(r - self._fill, arr.size - pos)
            self._buffer[self._fill : self._fill + take] = arr[pos : pos + take]
            self._fill += take
            self.samples_ingested += take
            pos += take
            if self._fill == r:
                verdicts.append(self._emit())
        return verdicts

    def _emit(self) -> Verdict:
        index = self.windows_emitted
        self.windows_emitted += 1
        self._fill = 0
        try:
            features = compute_features(self._buffer, window_index=index)
        except (DegenerateWindow, ZeroSignal):
            return Verdict(
                window_index=index,
                log_density=float("-inf"),
                label=Label.DAMAGED,
                node_id=self.node_id,
                degenerate=True,
            )
        return classify(self.model, features, node_id=self.node_id)


# -- model persistence ---------------------------------------------------------
#
# Versioned key-value text with full-precision decimal floats and a trailing
# checksum; diffable and portable across languages. repr() of a Python float
# round-trips bit-exactly, so load(save(m)) reproduces every stored value.

def _fmt(x: float) -> str:
    return repr(float(x))


def save_model(model: GaussianModel) -> bytes:
    """Serialize a model to its versioned text format (UTF-8 bytes)."""
    lines = [f"indde-model {MODEL_FORMAT_VERSION}", f"m {model.m}"]
    if model.window_spec is not None:
        lines.append(
            f"window {_fmt(model.window_spec.duration_s)} {_fmt(model.window_spec.freq)}"
        )
    else:
        lines.append("window none")
    lines.append(f"ridge_lambda {_fmt(model.ridge_lambda)}")
    if model.epsilon_log is not None:
        lines.append(f"epsilon_log {_fmt(model.epsilon_log)}")
    else:
        lines.append("epsilon_log none")
    lines.append("omega " + " ".join(_fmt(v) for v in model.omega))
    for i in range(model.m):
        lines.append(f"sigma {i} " + " ".join(_fmt(v) for v in model.sigma[i]))
    payload = "\n".join(lines) + "\n"
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    return (payload + f"checksum {digest}\n").encode("utf-8")


def load_model(data: bytes | str) -> GaussianModel:
    """Parse a model file; verifies version and checksum before any field."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.splitlines()
    if not lines:
        raise CorruptModel("empty model stream")

    head = lines[0].split()
    if len(head) != 2 or head[0] != "indde-model":
        raise CorruptModel("missing model header")
    try:
        version = int(head[1])
    except ValueError as exc:
        raise CorruptModel("unreadable format version") from exc
    if version != MODEL_FORMAT_VERSION:
        raise VersionMismatch(
            f"model format version {version}, expected {MODEL_FORMAT_VERSION}"
        )

    if not lines[-1].startswith("checksum "):
        raise CorruptModel("missing checksum line (truncated stream?)")
    stated = lines[-1].split()[-1]
    payload = "\n".join(lines[:-1]) + "\n"
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    if stated != digest:
        raise CorruptModel("checksum mismatch")

    fields: dict[str, list[str]] = {}
    sigma_rows: dict[int, list[str]] = {}
    for line in lines[1:-1]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "sigma":
            try:
                sigma_rows[int(parts[1])] = parts[2:]
            except (IndexError, ValueError) as exc:
                raise CorruptModel("malformed sigma row") from exc
        else:
            fields[parts[0]] = parts[1:]

    try:
        m = int(fields["m"][0])
        omega = np.array([float(v) for v in fields["omega"]], dtype=np.float64)
        ridge_lambda = float(fields["ridge_lambda"][0])
        eps_raw = fields["epsilon_log"][0]
        epsilon_log = None if eps_raw == "none" else float(eps_raw)
        win_raw = fields["window"]
        if win_raw[0] == "none":
            window_spec = None
        else:
            window_spec = WindowSpec(duration_s=float(win_raw[0]), freq=float(win_raw[1]))
        sigma = np.array(
            [[float(v) for v in sigma_rows[i]] for i in range(m)], dtype=np.float64
        )
    except (KeyError, IndexError, ValueError) as exc:
        raise CorruptModel(f"malformed model field: {exc}") from exc
    if omega.size != m or sigma.shape != (m, m):
        raise CorruptModel("model dimensions are inconsistent")

    return build_model(
        omega,
        sigma,
        ridge_lambda=ridge_lambda,
        epsilon_log=epsilon_log,
        window_spec=window_spec,
    )
