"""Multivariate Gaussian model of the healthy state.

The model is fitted on feature rows observed while the structure is known
healthy, and a new window is declared Damaged when its density falls strictly
below a threshold calibrated on held-out healthy rows. All density work
happens in log-space: with seven correlated features the linear-space density
underflows double precision routinely, so the threshold is stored as
``ln(epsilon)`` and the decision rule compares log-densities (equivalent by
monotonicity of ln).

The covariance is the population form E[x_u x_v] - E[x_u] E[x_v]. Its inverse
and determinant are never formed explicitly: a single Cholesky factorization
of ``sigma + lambda I`` provides both the squared Mahalanobis norm (by forward
substitution) and the log-determinant (from the factor diagonal).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    EmptyValidation,
    InsufficientSamples,
    NonFiniteInput,
    SingularCovariance,
    UncalibratedModel,
)
from .signal import FeatureVector, WindowSpec

LOG_2PI = math.log(2.0 * math.pi)

# Ridge default: the features are strongly correlated by construction
# (std_dev^2 equals variance, mean_square couples mean and variance), so the
# raw covariance is near-singular and needs a small diagonal lift.
DEFAULT_RIDGE_SCALE = 1e-8

DEFAULT_QUANTILE = 1.0
DEFAULT_MARGIN_LOG = math.log(10.0)


class Label(str, enum.Enum):
    HEALTHY = "Healthy"
    DAMAGED = "Damaged"


@dataclass(frozen=True)
class Verdict:
    """Per-window health classification emitted by a node."""

    window_index: int
    log_density: float
    label: Label
    node_id: str = ""
    degenerate: bool = False


class TrainingMatrix:
    """Feature rows observed in the healthy state, shape (t, m)."""

    def __init__(self, rows):
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("training matrix must be 2-D and non-empty")
        if not np.all(np.isfinite(X)):
            raise ValueError("training matrix entries must be finite")
        self.X = X

    @classmethod
    def from_features(cls, features: Sequence[FeatureVector]) -> "TrainingMatrix":
        return cls(np.array([f.as_array() for f in features]))

    @property
    def t(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class GaussianModel:
    """Fitted health model; immutable once calibrated.

    ``chol_lower`` is the lower-triangular L with L L^T = sigma + lambda I and
    ``log_det`` is ln|sigma + lambda I| = 2 * sum(ln L_ii). ``epsilon_log`` is
    None until a threshold has been calibrated.
    """

    omega: np.ndarray
    sigma: np.ndarray
    ridge_lambda: float
    chol_lower: np.ndarray
    log_det: float
    epsilon_log: float | None = None
    window_spec: WindowSpec | None = None

    @property
    def m(self) -> int:
        return int(self.omega.size)

    @property
    def calibrated(self) -> bool:
        return self.epsilon_log is not None


def build_model(
    omega,
    sigma,
    ridge_lambda: float = 0.0,
    epsilon_log: float | None = None,
    window_spec: WindowSpec | None = None,
) -> GaussianModel:
    """Assemble a model from explicit moments, factorizing sigma + lambda I."""
    omega = np.asarray(omega, dtype=np.float64).reshape(-1)
    sigma = np.asarray(sigma, dtype=np.float64)
    m = omega.size
    if sigma.shape != (m, m):
        raise ValueError(f"sigma must be {m}x{m}")
    if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(sigma))):
        raise NonFiniteInput("model moments must be finite")
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be nonnegative")
    try:
        chol = np.linalg.cholesky(sigma + ridge_lambda * np.eye(m))
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(
            f"covariance not positive definite with ridge {ridge_lambda:g}"
        ) from exc
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return GaussianModel(
        omega=omega,
        sigma=sigma,
        ridge_lambda=float(ridge_lambda),
        chol_lower=chol,
        log_det=log_det,
        epsilon_log=epsilon_log,
        window_spec=window_spec,
    )


def fit(X: TrainingMatrix, ridge_lambda: float | None = None) -> GaussianModel:
    """Fit feature means and population covariance; returns an uncalibrated model.

    ``ridge_lambda`` of None picks the default policy
    ``DEFAULT_RIDGE_SCALE * mean(diag(sigma))``; pass an explicit value
    (possibly 0) to override.
    """
    t, m = X.t, X.m
    if t < m + 1:
        raise InsufficientSamples(f"need at least {m + 1} rows, got {t}")
    data = X.X
    omega = data.mean(axis=0)
    centered = data - omega
    sigma = centered.T @ centered / t
    sigma = 0.5 * (sigma + sigma.T)  # shed floating-point asymmetry
    if ridge_lambda is None:
        ridge_lambda = DEFAULT_RIDGE_SCALE * float(np.mean(np.diag(sigma)))
    return build_model(omega, sigma, ridge_lambda)


def _as_vector(model: GaussianModel, x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        vec = x.as_array()
    else:
        vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.size != model.m:
        raise ValueError(f"expected {model.m} features, got {vec.size}")
    if not np.all(np.isfinite(vec)):
        raise NonFiniteInput("feature vector contains NaN/Inf")
    return vec


def log_density(model: GaussianModel, x) -> float:
    """Log of the model density at ``x``.

    Computes -(m/2) ln(2 pi) - log_det/2 - q/2 with the squared Mahalanobis
    norm q obtained by forward substitution against the Cholesky factor.
    """
    vec = _as_vector(model, x)
    y = solve_triangular(model.chol_lower, vec - model.omega, lower=True)
    q = float(y @ y)
    return -0.5 * (model.m * LOG_2PI + model.log_det + q)


def mahalanobis_sq(model: GaussianModel, x) -> float:
    """Squared Mahalanobis norm of ``x`` under the model."""
    vec = _as_vector(model, x)
    y = solve_triangular(model.chol_lower, vec - model.omega, lower=True)
    return float(y @ y)


def calibrate_threshold(
    model: GaussianModel,
    validation: TrainingMatrix,
    quantile: float = DEFAULT_QUANTILE,
    margin_log: float = DEFAULT_MARGIN_LOG,
) -> GaussianModel:
    """Set the decision threshold from held-out healthy rows.

    The base threshold is the k-th smallest validation log-density with
    k = ceil((1 - quantile) * t), so quantile = 1 selects the minimum; the
    margin is then subtracted in log-space. Returns a new calibrated model.
    """
    if validation is None or validation.t == 0:
        raise EmptyValidation("threshold calibration needs at least one row")
    if not 0.0 < quantile <= 1.0:
        raise ValueError("quantile must lie in (0, 1]")
    if margin_log < 0.0:
        raise ValueError("margin_log must be nonnegative")
    densities = sorted(log_density(model, row) for row in validation.X)
    t = len(densities)
    # the 1e-9 nudge keeps ceil() stable when (1-q)*t lands on an integer
    # up to floating-point noise
    k = min(t, max(1, math.ceil((1.0 - quantile) * t - 1e-9)))
    return replace(model, epsilon_log=densities[k - 1] - margin_log)


def classify(model: GaussianModel, x, node_id: str = "") -> Verdict:
    """Label ``x`` Damaged when its log-density is strictly below the threshold."""
    if model.epsilon_log is None:
        raise UncalibratedModel("calibrate a threshold before classifying")
    ld = log_density(model, x)
    label = Label.DAMAGED if ld < model.epsilon_log else Label.HEALTHY
    index = x.window_index if isinstance(x, FeatureVector) else 0
    return Verdict(window_index=index, log_density=ld, label=label, node_id=node_id)
