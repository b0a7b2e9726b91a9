"""On-node damage detection for vibration sensor networks.

Windows of raw acceleration are reduced to seven time-domain statistics, a
multivariate Gaussian fitted on healthy data scores new windows in log-space,
and windows whose density falls below a calibrated threshold are flagged
Damaged. A deterministic replay simulator runs many virtual nodes against
synthetic traces and accounts the network traffic saved by sending verdicts
instead of raw samples.
"""

__version__ = "0.1.0"

from . import errors
from .evalkit import (
    ConfusionMatrix,
    EvalReport,
    FeatureSummary,
    confusion,
    export_feature_diagnostics,
    metrics,
)
from .gauss import (
    GaussianModel,
    Label,
    TrainingMatrix,
    Verdict,
    build_model,
    calibrate_threshold,
    classify,
    fit,
    log_density,
    mahalanobis_sq,
)
from .pipeline import (
    DetectorState,
    TrainConfig,
    TrainResult,
    load_model,
    save_model,
    train,
)
from .signal import (
    FEATURE_NAMES,
    NUM_FEATURES,
    AccelTrace,
    FeatureVector,
    WindowSpec,
    compute_features,
    segment,
    window_count,
)
from .simnet import (
    LabelSpan,
    NodeSpec,
    NodeTraffic,
    Scenario,
    ScenarioResult,
    SynthParams,
    TrafficLedger,
    generate_trace,
    load_scenario,
    run_scenario,
    scenario_from_dict,
)

__all__ = [
    "__version__",
    "errors",
    "AccelTrace",
    "WindowSpec",
    "FeatureVector",
    "FEATURE_NAMES",
    "NUM_FEATURES",
    "segment",
    "compute_features",
    "window_count",
    "Label",
    "Verdict",
    "TrainingMatrix",
    "GaussianModel",
    "fit",
    "build_model",
    "log_density",
    "mahalanobis_sq",
    "calibrate_threshold",
    "classify",
    "TrainConfig",
    "TrainResult",
    "train",
    "DetectorState",
    "save_model",
    "load_model",
    "ConfusionMatrix",
    "EvalReport",
    "FeatureSummary",
    "confusion",
    "metrics",
    "export_feature_diagnostics",
    "SynthParams",
    "LabelSpan",
    "NodeSpec",
    "Scenario",
    "ScenarioResult",
    "NodeTraffic",
    "TrafficLedger",
    "generate_trace",
    "run_scenario",
    "scenario_from_dict",
    "load_scenario",
]
