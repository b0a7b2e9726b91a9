"""HTTP service exposing the detection pipeline to sensor nodes and operators.

Every endpoint is a stateless wrapper over the core package: traces and
models travel in the request/response bodies, so one service instance can
serve any number of nodes. Package errors map to HTTP 422 with a
machine-readable code.
"""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import FrequencyMismatch, InddeError, InvalidParams
from ..evalkit import confusion, export_feature_diagnostics, metrics
from ..gauss import Label
from ..pipeline import DetectorState, TrainConfig, load_model, save_model, train
from ..signal import AccelTrace, WindowSpec
from ..simnet import (
    NodeSpec,
    Scenario,
    SynthParams,
    generate_trace,
    run_scenario,
)
from . import schemas


def _error_payload(exc: InddeError) -> dict:
    payload = {"code": exc.code, "message": str(exc)}
    line = getattr(exc, "line", None)
    if line is not None:
        payload["line"] = line
    return {"error": payload}


def _scenario_from_model(doc: schemas.ScenarioModel) -> Scenario:
    nodes = tuple(
        NodeSpec(
            node_id=n.node_id,
            params=SynthParams(**n.params.model_dump()),
            train_s=n.train_s,
            monitor_healthy_s=n.monitor_healthy_s,
            monitor_damaged_s=n.monitor_damaged_s,
        )
        for n in doc.nodes
    )
    return Scenario(
        nodes=nodes,
        window=WindowSpec(doc.window.duration_s, doc.window.freq),
        seed=doc.seed,
        train_fraction=doc.train.train_fraction,
        quantile=doc.train.quantile,
        margin_log=doc.train.margin_log,
        ridge_lambda=doc.train.ridge_lambda,
        min_train_windows=doc.train.min_train_windows,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="indde", version=__version__)

    @app.exception_handler(InddeError)
    async def indde_error_handler(request: Request, exc: InddeError):
        return JSONResponse(status_code=422, content=_error_payload(exc))

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/train", response_model=schemas.TrainResponse)
    def train_endpoint(req: schemas.TrainRequest):
        trace = AccelTrace(
            samples=np.array(req.samples), freq=req.freq, node_id=req.node_id
        )
        cfg = TrainConfig(
            window=WindowSpec(duration_s=req.window_s, freq=req.freq),
            train_fraction=req.train_fraction,
            ridge_lambda=req.ridge_lambda,
            quantile=req.quantile,
            margin_log=req.margin_log,
            min_train_windows=req.min_train_windows,
        )
        result = train(trace, cfg)
        summary = export_feature_diagnostics(result.fit_matrix)
        return schemas.TrainResponse(
            model_text=save_model(result.model).decode("utf-8"),
            fit_windows=result.fit_windows,
            validation_windows=result.validation_windows,
            epsilon_log=result.model.epsilon_log,
            skipped_degenerate=result.skipped_degenerate,
            discarded_samples=result.discarded_samples,
            feature_summary=[
                schemas.FeatureSummaryModel.from_summary(s) for s in summary
            ],
        )

    @app.post("/detect", response_model=schemas.DetectResponse)
    def detect_endpoint(req: schemas.DetectRequest):
        model = load_model(req.model_text)
        if model.window_spec is None:
            raise InvalidParams("model carries no window spec")
        if req.freq is not None and req.freq != model.window_spec.freq:
            raise FrequencyMismatch(
                f"trace sampled at {req.freq} Hz, model expects "
                f"{model.window_spec.freq} Hz"
            )
        detector = DetectorState(model, node_id=req.node_id)
        verdicts = detector.ingest_many(req.samples)
        damaged = sum(1 for v in verdicts if v.label is Label.DAMAGED)
        return schemas.DetectResponse(
            verdicts=[schemas.VerdictModel.from_verdict(v) for v in verdicts],
            windows=len(verdicts),
            damaged_windows=damaged,
            leftover_samples=detector.buffered,
        )

    @app.post("/synthesize", response_model=schemas.SynthesizeResponse)
    def synthesize_endpoint(req: schemas.SynthesizeRequest):
        params = SynthParams(**req.params.model_dump())
        trace, schedule = generate_trace(
            params, req.duration_s, req.freq, req.seed, node_id=req.node_id
        )
        return schemas.SynthesizeResponse(
            samples=trace.samples.tolist(),
            freq=trace.freq,
            node_id=trace.node_id,
            schedule=[
                schemas.LabelSpanModel(
                    start_s=s.start_s, end_s=s.end_s, label=s.label.value
                )
                for s in schedule
            ],
        )

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate_endpoint(req: schemas.SimulateRequest):
        scenario = _scenario_from_model(req.scenario)
        result = run_scenario(scenario, workers=req.workers)
        nodes = []
        for node_id, nr in result.nodes.items():
            nodes.append(
                schemas.NodeResultModel(
                    node_id=node_id,
                    fit_windows=nr.train.fit_windows,
                    validation_windows=nr.train.validation_windows,
                    epsilon_log=nr.train.model.epsilon_log,
                    skipped_degenerate=nr.train.skipped_degenerate,
                    verdicts=[
                        schemas.VerdictModel.from_verdict(v) for v in nr.verdicts
                    ],
                    truth=[t.value for t in nr.truth],
                    confusion=schemas.ConfusionModel.from_cm(nr.confusion),
                    metrics=schemas.MetricsModel.from_report(nr.report),
                    traffic=schemas.TrafficModel(
                        node_id=nr.traffic.node_id,
                        raw_samples_monitored=nr.traffic.raw_samples_monitored,
                        verdict_messages_sent=nr.traffic.verdict_messages_sent,
                        centralized_equivalent_samples=(
                            nr.traffic.centralized_equivalent_samples
                        ),
                        verdict_bytes=nr.traffic.verdict_bytes,
                        raw_bytes=nr.traffic.raw_bytes,
                    ),
                )
            )
        return schemas.SimulateResponse(
            nodes=nodes,
            collected=[schemas.VerdictModel.from_verdict(v) for v in result.collected],
            overall_confusion=schemas.ConfusionModel.from_cm(result.overall_confusion),
            overall_metrics=schemas.MetricsModel.from_report(result.overall_report),
            failed=result.failed,
        )

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate_endpoint(req: schemas.EvaluateRequest):
        try:
            predicted = [Label(v) for v in req.predicted]
            truth = [Label(t) for t in req.truth]
        except ValueError as exc:
            raise InvalidParams(str(exc)) from exc
        cm = confusion(predicted, truth)
        return schemas.EvaluateResponse(
            confusion=schemas.ConfusionModel.from_cm(cm),
            metrics=schemas.MetricsModel.from_report(metrics(cm)),
        )

    @app.post("/inspect", response_model=schemas.InspectResponse)
    def inspect_endpoint(req: schemas.InspectRequest):
        model = load_model(req.model_text)
        window = None
        if model.window_spec is not None:
            window = schemas.WindowModel(
                duration_s=model.window_spec.duration_s,
                freq=model.window_spec.freq,
            )
        return schemas.InspectResponse(
            m=model.m,
            omega=model.omega.tolist(),
            sigma_diag=np.diag(model.sigma).tolist(),
            ridge_lambda=model.ridge_lambda,
            log_det=model.log_det,
            epsilon_log=model.epsilon_log,
            calibrated=model.calibrated,
            window=window,
        )

    return app


app = create_app()
