import math

import numpy as np
import pytest

from indde import (
    AccelTrace,
    DetectorState,
    Label,
    TrainConfig,
    WindowSpec,
    load_model,
    log_density,
    save_model,
    train,
)
from indde.errors import (
    CorruptModel,
    NonFiniteSample,
    TooFewWindows,
    UncalibratedModel,
    VersionMismatch,
)


def healthy_trace(n, freq=50.0, seed=0, node_id="n1"):
    rng = np.random.default_rng(seed)
    return AccelTrace(rng.standard_normal(n), freq=freq, node_id=node_id)


def trained(n=4000, freq=50.0, r_s=1.0, seed=0, **cfg_kwargs):
    cfg = TrainConfig(window=WindowSpec(r_s, freq), **cfg_kwargs)
    return train(healthy_trace(n, freq, seed), cfg), cfg


class TestTrain:
    def test_split_counts(self):
        result, _ = trained(n=2000)  # 40 windows of 50 samples
        assert result.fit_windows == 30
        assert result.validation_windows == 10
        assert result.skipped_degenerate == 0
        assert result.discarded_samples == 0
        assert result.model.calibrated
        assert result.model.window_spec == WindowSpec(1.0, 50.0)

    def test_quarter_hour_bookkeeping(self):
        # 16 windows, fit on the leading 0.75 -> 12, mirroring a 6-of-8 minute split
        result, _ = trained(n=16 * 50)
        assert result.fit_windows == 12
        assert result.validation_windows == 4

    def test_trace_shorter_than_one_window(self):
        cfg = TrainConfig(window=WindowSpec(1.0, 50.0))
        with pytest.raises(TooFewWindows):
            train(healthy_trace(30), cfg)

    def test_too_few_usable_windows(self):
        cfg = TrainConfig(window=WindowSpec(1.0, 50.0))
        with pytest.raises(TooFewWindows):
            train(healthy_trace(8 * 50), cfg)  # 8 windows < default minimum

    def test_degenerate_windows_are_skipped_and_counted(self):
        rng = np.random.default_rng(3)
        samples = rng.standard_normal(20 * 50)
        samples[5 * 50 : 6 * 50] = 2.0  # one flat window
        trace = AccelTrace(samples, freq=50.0)
        result = train(trace, TrainConfig(window=WindowSpec(1.0, 50.0)))
        assert result.skipped_degenerate == 1
        assert result.fit_windows + result.validation_windows == 19

    def test_validation_uses_trailing_windows(self):
        # variance ramps up late in the trace; the calibrated threshold must
        # come from those trailing windows, proving the split is chronological
        rng = np.random.default_rng(4)
        samples = rng.standard_normal(40 * 50)
        samples[30 * 50 :] *= 4.0
        trace = AccelTrace(samples, freq=50.0)
        cfg = TrainConfig(window=WindowSpec(1.0, 50.0), quantile=1.0, margin_log=0.0)
        result = train(trace, cfg)
        windows = samples.reshape(40, 50)
        from indde import compute_features

        val_densities = [
            log_density(result.model, compute_features(w)) for w in windows[30:]
        ]
        assert result.model.epsilon_log == min(val_densities)

    def test_train_fraction_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(window=WindowSpec(1.0, 50.0), train_fraction=1.0)
        with pytest.raises(ValueError):
            TrainConfig(window=WindowSpec(1.0, 50.0), min_train_windows=3)

    def test_determinism(self):
        a, _ = trained(seed=77)
        b, _ = trained(seed=77)
        assert save_model(a.model) == save_model(b.model)


class TestDetectorState:
    def test_no_verdict_until_window_fills(self):
        result, _ = trained()
        det = DetectorState(result.model, node_id="n1")
        r = det.window_size
        for _ in range(r - 1):
            assert det.ingest(0.5 + np.random.default_rng(1).standard_normal()) is None
        verdict = det.ingest(0.1)
        assert verdict is not None
        assert verdict.window_index == 0
        assert det.windows_emitted == 1

    def test_bookkeeping_identity_under_chunked_feeds(self):
        result, _ = trained()
        det = DetectorState(result.model)
        rng = np.random.default_rng(5)
        fed = 0
        for _ in range(30):
            chunk = rng.standard_normal(int(rng.integers(1, 137)))
            det.ingest_many(chunk)
            fed += chunk.size
            assert det.samples_ingested == fed
            assert det.windows_emitted == fed // det.window_size

    def test_ingest_many_equals_sample_at_a_time(self):
        result, _ = trained()
        rng = np.random.default_rng(6)
        samples = rng.standard_normal(170)
        one = DetectorState(result.model, "a")
        bulk = DetectorState(result.model, "a")
        singles = [v for v in (one.ingest(s) for s in samples) if v is not None]
        assert bulk.ingest_many(samples) == singles

    def test_healthy_windows_mostly_pass(self):
        # 216 fit + 72 validation windows of 200 samples; fresh windows from
        # the training distribution must classify Healthy at >= the quantile
        result, _ = trained(
            n=57_600, freq=100.0, r_s=2.0, seed=7, quantile=0.99,
            margin_log=math.log(1e4),
        )
        det = DetectorState(result.model)
        rng = np.random.default_rng(8)
        verdicts = det.ingest_many(rng.standard_normal(500 * det.window_size))
        damaged = sum(1 for v in verdicts if v.label is Label.DAMAGED)
        assert damaged / len(verdicts) <= 0.01

    def test_constant_window_is_damaged_and_flagged(self):
        result, _ = trained()
        det = DetectorState(result.model)
        verdicts = det.ingest_many(np.full(det.window_size, 3.25))
        assert len(verdicts) == 1
        assert verdicts[0].label is Label.DAMAGED
        assert verdicts[0].degenerate
        assert verdicts[0].log_density == float("-inf")

    def test_non_finite_sample_rejected(self):
        result, _ = trained()
        det = DetectorState(result.model)
        with pytest.raises(NonFiniteSample):
            det.ingest(float("nan"))
        with pytest.raises(NonFiniteSample):
            det.ingest_many([1.0, 2.0, float("inf")])

    def test_requires_calibrated_model(self):
        result, _ = trained()
        from dataclasses import replace

        with pytest.raises(UncalibratedModel):
            DetectorState(replace(result.model, epsilon_log=None))


class TestModelRoundTrip:
    def test_bit_exact_round_trip(self):
        result, _ = trained(seed=11)
        blob = save_model(result.model)
        loaded = load_model(blob)
        assert np.array_equal(loaded.omega, result.model.omega)
        assert np.array_equal(loaded.sigma, result.model.sigma)
        assert loaded.ridge_lambda == result.model.ridge_lambda
        assert loaded.epsilon_log == result.model.epsilon_log
        assert loaded.window_spec == result.model.window_spec

    def test_classification_identical_after_round_trip(self):
        from indde import classify

        result, _ = trained(seed=12)
        loaded = load_model(save_model(result.model))
        rng = np.random.default_rng(13)
        for _ in range(100):
            x = result.model.omega + rng.standard_normal(7) * rng.uniform(0, 4)
            assert classify(loaded, x) == classify(result.model, x)

    def test_save_is_deterministic(self):
        result, _ = trained(seed=14)
        assert save_model(result.model) == save_model(result.model)

    def test_truncated_stream(self):
        result, _ = trained(seed=15)
        blob = save_model(result.model)
        with pytest.raises(CorruptModel):
            load_model(blob[: len(blob) // 2])
        with pytest.raises(CorruptModel):
            load_model(b"")

    def test_checksum_flip(self):
        result, _ = trained(seed=16)
        text = save_model(result.model).decode()
        lines = text.splitlines()
        # corrupt one stored digit without touching the checksum line
        for i, line in enumerate(lines):
            if line.startswith("omega"):
                lines[i] = line.replace("0", "1", 1)
                break
        with pytest.raises(CorruptModel):
            load_model("\n".join(lines) + "\n")

    def test_version_mismatch(self):
        result, _ = trained(seed=17)
        text = save_model(result.model).decode()
        hacked = text.replace("indde-model 1", "indde-model 99", 1)
        with pytest.raises(VersionMismatch):
            load_model(hacked)

    def test_uncalibrated_round_trip(self):
        from indde import TrainingMatrix, fit

        rng = np.random.default_rng(18)
        model = fit(TrainingMatrix(rng.standard_normal((30, 7))))
        loaded = load_model(save_model(model))
        assert loaded.epsilon_log is None
        assert loaded.window_spec is None
        assert np.array_equal(loaded.sigma, model.sigma)
