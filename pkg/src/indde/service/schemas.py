"""Pydantic request/response models for the HTTP service.

Log-densities can be -inf for degenerate windows; JSON has no literal for
that, so verdict payloads carry ``log_density: null`` when the window was
degenerate.
"""
from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict, Field

from ..evalkit import ConfusionMatrix, EvalReport, FeatureSummary
from ..gauss import DEFAULT_MARGIN_LOG, DEFAULT_QUANTILE, Verdict
from ..signal import NUM_FEATURES


class HealthResponse(BaseModel):
    status: str
    version: str


class WindowModel(BaseModel):
    duration_s: float = Field(gt=0)
    freq: float = Field(gt=0)


class VerdictModel(BaseModel):
    window_index: int
    log_density: float | None
    label: str
    node_id: str = ""
    degenerate: bool = False

    @classmethod
    def from_verdict(cls, v: Verdict) -> "VerdictModel":
        ld = None if math.isinf(v.log_density) else v.log_density
        return cls(
            window_index=v.window_index,
            log_density=ld,
            label=v.label.value,
            node_id=v.node_id,
            degenerate=v.degenerate,
        )


class FeatureSummaryModel(BaseModel):
    name: str
    mean: float
    std: float
    minimum: float
    maximum: float
    deciles: list[float]

    @classmethod
    def from_summary(cls, s: FeatureSummary) -> "FeatureSummaryModel":
        return cls(
            name=s.name,
            mean=s.mean,
            std=s.std,
            minimum=s.minimum,
            maximum=s.maximum,
            deciles=list(s.deciles),
        )


class TrainRequest(BaseModel):
    samples: list[float] = Field(min_length=1)
    freq: float = Field(gt=0)
    window_s: float = Field(gt=0)
    node_id: str = ""
    train_fraction: float = Field(default=0.75, gt=0, lt=1)
    quantile: float = Field(default=DEFAULT_QUANTILE, gt=0, le=1)
    margin_log: float = Field(default=DEFAULT_MARGIN_LOG, ge=0)
    ridge_lambda: float | None = Field(default=None, ge=0)
    min_train_windows: int = Field(default=NUM_FEATURES + 2, ge=NUM_FEATURES + 2)


class TrainResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_text: str
    fit_windows: int
    validation_windows: int
    epsilon_log: float
    skipped_degenerate: int
    discarded_samples: int
    feature_summary: list[FeatureSummaryModel]


class DetectRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_text: str
    samples: list[float] = Field(min_length=1)
    freq: float | None = Field(default=None, gt=0)
    node_id: str = ""


class DetectResponse(BaseModel):
    verdicts: list[VerdictModel]
    windows: int
    damaged_windows: int
    leftover_samples: int


class SynthParamsModel(BaseModel):
    sigma_h: float = 1.0
    ar_coeff: float = 0.0
    damage_onset_s: float | None = None
    damage_std_factor: float = 1.5
    damage_mixture_weight: float = 0.0
    damage_mixture_scale: float = 5.0
    sine_amplitude: float = 0.0
    sine_freq_hz: float = 0.0


class SynthesizeRequest(BaseModel):
    params: SynthParamsModel = SynthParamsModel()
    duration_s: float = Field(gt=0)
    freq: float = Field(gt=0)
    seed: int
    node_id: str = ""


class LabelSpanModel(BaseModel):
    start_s: float
    end_s: float
    label: str


class SynthesizeResponse(BaseModel):
    samples: list[float]
    freq: float
    node_id: str
    schedule: list[LabelSpanModel]


class ScenarioNodeModel(BaseModel):
    node_id: str
    params: SynthParamsModel = SynthParamsModel()
    train_s: float = Field(gt=0)
    monitor_healthy_s: float = Field(default=0.0, ge=0)
    monitor_damaged_s: float = Field(default=0.0, ge=0)


class ScenarioTrainModel(BaseModel):
    train_fraction: float = Field(default=0.75, gt=0, lt=1)
    quantile: float = Field(default=DEFAULT_QUANTILE, gt=0, le=1)
    margin_log: float = Field(default=DEFAULT_MARGIN_LOG, ge=0)
    ridge_lambda: float | None = Field(default=None, ge=0)
    min_train_windows: int = Field(default=NUM_FEATURES + 2, ge=NUM_FEATURES + 2)


class ScenarioModel(BaseModel):
    seed: int
    window: WindowModel
    nodes: list[ScenarioNodeModel] = Field(min_length=1)
    train: ScenarioTrainModel = ScenarioTrainModel()


class SimulateRequest(BaseModel):
    scenario: ScenarioModel
    workers: int = Field(default=1, ge=1)


class ConfusionModel(BaseModel):
    tp: int
    tn: int
    fp: int
    fn: int

    @classmethod
    def from_cm(cls, cm: ConfusionMatrix) -> "ConfusionModel":
        return cls(tp=cm.tp, tn=cm.tn, fp=cm.fp, fn=cm.fn)


class MetricsModel(BaseModel):
    accuracy: float | None
    precision: float | None
    recall: float | None
    f_score: float | None
    type1_error: float | None
    type2_error: float | None

    @classmethod
    def from_report(cls, rep: EvalReport | None) -> "MetricsModel | None":
        if rep is None:
            return None
        return cls(
            accuracy=rep.accuracy,
            precision=rep.precision,
            recall=rep.recall,
            f_score=rep.f_score,
            type1_error=rep.type1_error,
            type2_error=rep.type2_error,
        )


class TrafficModel(BaseModel):
    node_id: str
    raw_samples_monitored: int
    verdict_messages_sent: int
    centralized_equivalent_samples: int
    verdict_bytes: int
    raw_bytes: int


class NodeResultModel(BaseModel):
    node_id: str
    fit_windows: int
    validation_windows: int
    epsilon_log: float
    skipped_degenerate: int
    verdicts: list[VerdictModel]
    truth: list[str]
    confusion: ConfusionModel
    metrics: MetricsModel | None
    traffic: TrafficModel


class SimulateResponse(BaseModel):
    nodes: list[NodeResultModel]
    collected: list[VerdictModel]
    overall_confusion: ConfusionModel
    overall_metrics: MetricsModel | None
    failed: dict[str, str]


class EvaluateRequest(BaseModel):
    predicted: list[str]
    truth: list[str]


class EvaluateResponse(BaseModel):
    confusion: ConfusionModel
    metrics: MetricsModel


class InspectRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_text: str


class InspectResponse(BaseModel):
    m: int
    omega: list[float]
    sigma_diag: list[float]
    ridge_lambda: float
    log_det: float
    epsilon_log: float | None
    calibrated: bool
    window: WindowModel | None
