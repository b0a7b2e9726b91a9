"""Command-line client for the detection service.

Commands talk to the HTTP API: by default an in-process service instance (no
server required), or a running deployment via ``--server http://host:port``.
File reading and writing stays on the client side; the service sees raw
sample arrays and model text.

Exit codes: 0 success, 1 error (single machine-parsable line on stderr),
2 when ``detect`` saw at least one Damaged window.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from . import __version__, traceio
from .errors import InddeError
from .gauss import DEFAULT_MARGIN_LOG, DEFAULT_QUANTILE, Label, Verdict
from .signal import FEATURE_NAMES, NUM_FEATURES, AccelTrace
from .simnet import LabelSpan
from .traceio import fmt, fmt_opt

REQUEST_TIMEOUT = 600.0


class CommandError(Exception):
    """Carries a machine-readable code and an exit status."""

    def __init__(self, code: str, message: str, status: int = 1):
        self.code = code
        self.status = status
        super().__init__(message)


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=REQUEST_TIMEOUT) as client:
            response = client.post(path, json=payload)
    else:
        response = asyncio.run(_post_local(path, payload))
    if response.status_code == 200:
        return response.json()
    try:
        body = response.json()
    except ValueError:
        body = {}
    if "error" in body:
        raise CommandError(body["error"]["code"], body["error"]["message"])
    detail = body.get("detail", response.text)
    raise CommandError("invalid-request", json.dumps(detail, default=str))


async def _post_local(path: str, payload: dict) -> httpx.Response:
    from .service import create_app

    transport = httpx.ASGITransport(app=create_app())
    async with httpx.AsyncClient(
        transport=transport, base_url="http://indde.local", timeout=REQUEST_TIMEOUT
    ) as client:
        return await client.post(path, json=payload)


def _verdict_from_payload(item: dict) -> Verdict:
    ld = item["log_density"]
    return Verdict(
        window_index=item["window_index"],
        log_density=float("-inf") if ld is None else ld,
        label=Label(item["label"]),
        node_id=item.get("node_id", ""),
        degenerate=item.get("degenerate", False),
    )


# -- commands -----------------------------------------------------------------

def cmd_train(args) -> int:
    trace = traceio.load_csv(args.input, freq_override=args.freq)
    payload = {
        "samples": trace.samples.tolist(),
        "freq": trace.freq,
        "window_s": args.window_sec,
        "node_id": trace.node_id,
        "train_fraction": args.split,
        "quantile": args.quantile,
        "margin_log": args.margin_log,
        "ridge_lambda": args.ridge,
        "min_train_windows": args.min_windows,
    }
    body = _post(args.server, "/train", payload)
    Path(args.out).write_text(body["model_text"], encoding="utf-8")
    if args.feature_summary:
        _write_feature_summary(body["feature_summary"], args.feature_summary)
    print(f"fit_windows {body['fit_windows']}")
    print(f"validation_windows {body['validation_windows']}")
    print(f"epsilon_log {fmt(body['epsilon_log'])}")
    print(f"skipped_degenerate {body['skipped_degenerate']}")
    print(f"discarded_samples {body['discarded_samples']}")
    return 0


def _write_feature_summary(rows: list[dict], path) -> None:
    lines = ["feature,mean,std,min,max," + ",".join(f"d{k}" for k in range(1, 11))]
    for row in rows:
        head = [row["name"]] + [
            fmt(row[k]) for k in ("mean", "std", "minimum", "maximum")
        ]
        lines.append(",".join(head + [fmt(v) for v in row["deciles"]]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_detect(args) -> int:
    model_text = Path(args.model).read_text(encoding="utf-8")
    trace = traceio.load_csv(args.input, freq_override=args.freq)
    payload = {
        "model_text": model_text,
        "samples": trace.samples.tolist(),
        "freq": trace.freq,
        "node_id": trace.node_id,
    }
    body = _post(args.server, "/detect", payload)
    for item in body["verdicts"]:
        print(traceio.verdict_line(_verdict_from_payload(item)))
    return 2 if body["damaged_windows"] > 0 else 0


def cmd_simulate(args) -> int:
    try:
        doc = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CommandError("scenario-error", f"scenario file is not valid JSON: {exc}")
    body = _post(args.server, "/simulate", {"scenario": doc, "workers": args.workers})

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    collected = [_verdict_from_payload(item) for item in body["collected"]]
    traceio.write_verdicts(collected, out / "verdicts.csv", include_node=True)

    report_rows = []
    ledger_rows = []
    for node in body["nodes"]:
        node_id = node["node_id"]
        verdicts = [_verdict_from_payload(item) for item in node["verdicts"]]
        traceio.write_verdicts(verdicts, out / f"verdicts_{node_id}.csv")
        traceio.write_truth(
            [Label(t) for t in node["truth"]], out / f"truth_{node_id}.csv"
        )
        ledger_rows.append(node["traffic"])
        report_rows.append((node_id, node["confusion"], node["metrics"]))
    report_rows.append(("overall", body["overall_confusion"], body["overall_metrics"]))

    _write_ledger_payload(ledger_rows, out / "ledger.csv")
    _write_report_payload(report_rows, out / "report.csv")

    print(f"nodes {len(body['nodes'])}")
    print(f"verdicts {len(collected)}")
    print(f"out_dir {out}")
    status = 0
    for node_id, message in body["failed"].items():
        print(f"error: node {node_id}: {message}", file=sys.stderr)
        status = 1
    return status


def _write_ledger_payload(rows: list[dict], path) -> None:
    lines = [traceio.LEDGER_HEADER]
    for r in rows:
        lines.append(
            f"{r['node_id']},{r['raw_samples_monitored']},"
            f"{r['verdict_messages_sent']},{r['centralized_equivalent_samples']},"
            f"{r['verdict_bytes']},{r['raw_bytes']}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_report_payload(rows, path) -> None:
    lines = [traceio.REPORT_HEADER]
    for node_id, cm, rep in rows:
        if rep is None:
            tail = ",".join(["undefined"] * 6)
        else:
            tail = ",".join(
                fmt_opt(rep[k])
                for k in (
                    "accuracy",
                    "precision",
                    "recall",
                    "f_score",
                    "type1_error",
                    "type2_error",
                )
            )
        lines.append(f"{node_id},{cm['tp']},{cm['tn']},{cm['fp']},{cm['fn']},{tail}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_eval(args) -> int:
    predicted = [v.label for v in traceio.read_verdicts(args.verdicts)]
    truth = traceio.read_truth(args.truth)
    payload = {
        "predicted": [p.value for p in predicted],
        "truth": [t.value for t in truth],
    }
    body = _post(args.server, "/evaluate", payload)
    cm = body["confusion"]
    for key in ("tp", "tn", "fp", "fn"):
        print(f"{key} {cm[key]}")
    rep = body["metrics"]
    for key in (
        "accuracy",
        "precision",
        "recall",
        "f_score",
        "type1_error",
        "type2_error",
    ):
        print(f"{key} {fmt_opt(rep[key])}")
    return 0


def cmd_synth(args) -> int:
    try:
        doc = json.loads(Path(args.params).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CommandError("invalid-params", f"params file is not valid JSON: {exc}")
    duration_s = args.duration_sec if args.duration_sec else doc.pop("duration_s", None)
    freq = args.freq if args.freq else doc.pop("freq", None)
    doc.pop("duration_s", None)
    doc.pop("freq", None)
    if duration_s is None or freq is None:
        raise CommandError(
            "invalid-params",
            "duration_s and freq must appear in the params file or as flags",
        )
    payload = {
        "params": doc,
        "duration_s": duration_s,
        "freq": freq,
        "seed": args.seed,
        "node_id": args.node_id or Path(args.out).stem,
    }
    body = _post(args.server, "/synthesize", payload)
    trace = AccelTrace(
        samples=body["samples"], freq=body["freq"], node_id=body["node_id"]
    )
    traceio.write_trace_csv(trace, args.out)
    sidecar = Path(args.out).with_suffix(Path(args.out).suffix + ".labels.csv")
    spans = [
        LabelSpan(s["start_s"], s["end_s"], Label(s["label"]))
        for s in body["schedule"]
    ]
    traceio.write_schedule(spans, sidecar)
    print(f"samples {len(body['samples'])}")
    print(f"out {args.out}")
    print(f"labels {sidecar}")
    return 0


def cmd_inspect(args) -> int:
    model_text = Path(args.model).read_text(encoding="utf-8")
    body = _post(args.server, "/inspect", {"model_text": model_text})
    print(f"m {body['m']}")
    if body["window"] is not None:
        print(f"window_duration_s {fmt(body['window']['duration_s'])}")
        print(f"window_freq {fmt(body['window']['freq'])}")
    else:
        print("window none")
    print(f"ridge_lambda {fmt(body['ridge_lambda'])}")
    print(f"log_det {fmt(body['log_det'])}")
    print(f"epsilon_log {fmt_opt(body['epsilon_log'])}")
    names = _feature_names(body["m"])
    for name, value in zip(names, body["omega"]):
        print(f"omega {name} {fmt(value)}")
    for name, value in zip(names, body["sigma_diag"]):
        print(f"sigma_diag {name} {fmt(value)}")
    return 0


def _feature_names(m: int):
    if m == len(FEATURE_NAMES):
        return FEATURE_NAMES
    return tuple(f"f{j + 1}" for j in range(m))


# -- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="indde",
        description="On-node damage detection: train, detect, simulate, evaluate.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running service; default runs the service in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit and calibrate a health model from a healthy trace")
    p.add_argument("--input", required=True, help="healthy-state trace CSV")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--freq", type=float, default=None, help="sampling frequency override (Hz)")
    p.add_argument("--window-sec", type=float, required=True, help="window duration (s)")
    p.add_argument("--split", type=float, default=0.75, help="leading fraction of windows used for the fit")
    p.add_argument("--quantile", type=float, default=DEFAULT_QUANTILE)
    p.add_argument("--margin-log", type=float, default=DEFAULT_MARGIN_LOG)
    p.add_argument("--ridge", type=float, default=None, help="ridge lambda; default scales with the covariance diagonal")
    p.add_argument("--min-windows", type=int, default=NUM_FEATURES + 2)
    p.add_argument("--feature-summary", default=None, help="also write a per-feature diagnostics CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="classify every window of a trace against a model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--freq", type=float, default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="run a multi-node replay scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="score a verdict file against ground truth")
    p.add_argument("--verdicts", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic trace and label sidecar")
    p.add_argument("--params", required=True, help="generator params JSON file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--duration-sec", type=float, default=None)
    p.add_argument("--freq", type=float, default=None)
    p.add_argument("--node-id", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="dump the fields of a model file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return exc.status
    except InddeError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: file-not-found: {exc.filename}", file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"error: connection: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
