import math
from dataclasses import replace

import numpy as np
import pytest

from indde import (
    Label,
    TrainingMatrix,
    build_model,
    calibrate_threshold,
    classify,
    compute_features,
    fit,
    log_density,
    mahalanobis_sq,
)
from indde.errors import (
    EmptyValidation,
    InsufficientSamples,
    NonFiniteInput,
    SingularCovariance,
    UncalibratedModel,
)

from reference import double_loop_cov, rel_close

LOG_2PI = math.log(2.0 * math.pi)


def random_spd(rng, m, scale=1.0):
    A = rng.standard_normal((m, m))
    return scale * (A @ A.T + m * np.eye(m))


class TestTrainingMatrix:
    def test_rejects_empty_and_non_finite(self):
        with pytest.raises(ValueError):
            TrainingMatrix(np.empty((0, 7)))
        with pytest.raises(ValueError):
            TrainingMatrix(np.array([[1.0, np.nan]]))

    def test_from_features(self):
        rng = np.random.default_rng(0)
        rows = [compute_features(rng.standard_normal(32), window_index=i) for i in range(3)]
        X = TrainingMatrix.from_features(rows)
        assert X.t == 3 and X.m == 7
        assert X.X[1, 0] == rows[1].mean


class TestFit:
    def test_two_dim_toy_set(self):
        X = TrainingMatrix(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]))
        model = fit(X, ridge_lambda=0.0)
        assert np.allclose(model.omega, [1.0, 1.0], atol=1e-15)
        assert np.allclose(model.sigma, np.eye(2), atol=1e-15)
        # direct E[xy] - E[x]E[y] oracle agrees
        omega_ref, sigma_ref = double_loop_cov(X.X)
        assert np.allclose(model.omega, omega_ref, atol=1e-15)
        assert np.allclose(model.sigma, sigma_ref, atol=1e-14)

    def test_identical_rows_need_explicit_ridge(self):
        X = TrainingMatrix(np.tile(np.arange(1.0, 8.0), (10, 1)))
        model = fit(X, ridge_lambda=1e-6)
        assert np.allclose(model.sigma, 0.0)
        assert rel_close(model.log_det, 7 * math.log(1e-6), rel=1e-12)
        # the default ridge scales with the (zero) diagonal, so it cannot help here
        with pytest.raises(SingularCovariance):
            fit(X)

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            fit(TrainingMatrix(np.random.default_rng(1).standard_normal((7, 7))))

    def test_matches_double_loop_reference(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            t = int(rng.integers(8, 51))
            data = rng.standard_normal((t, 7)) * rng.uniform(0.1, 3.0) + rng.uniform(
                -2, 2, size=7
            )
            model = fit(TrainingMatrix(data), ridge_lambda=0.0)
            omega_ref, sigma_ref = double_loop_cov(data)
            for a, b in zip(model.omega, omega_ref):
                assert rel_close(a, b, rel=1e-10, abs_floor=1e-14)
            for a, b in zip(model.sigma.reshape(-1), sigma_ref.reshape(-1)):
                assert rel_close(a, b, rel=1e-10, abs_floor=1e-13)

    def test_monte_carlo_recovery(self):
        rng = np.random.default_rng(3)
        omega_true = rng.uniform(-1, 1, size=7)
        sigma_true = random_spd(rng, 7, scale=0.1)
        draws = rng.multivariate_normal(omega_true, sigma_true, size=10_000)
        model = fit(TrainingMatrix(draws), ridge_lambda=0.0)
        assert np.max(np.abs(model.omega - omega_true)) < 5e-2
        assert np.max(np.abs(model.sigma - sigma_true)) < 1e-1


class TestLogDensity:
    def test_standard_normal_peak(self):
        model = build_model([0.0], [[1.0]])
        ld = log_density(model, [0.0])
        assert abs(ld - (-0.5 * LOG_2PI)) < 1e-12
        assert abs(math.exp(ld) - 0.3989422804014327) < 1e-12

    def test_seven_dim_identity_peak(self):
        model = build_model(np.zeros(7), np.eye(7))
        assert abs(log_density(model, np.zeros(7)) - (-3.5 * LOG_2PI)) < 1e-12

    def test_diagonal_hand_case(self):
        model = build_model([0.0, 0.0], [[2.0, 0.0], [0.0, 0.5]])
        ld = log_density(model, [2.0, 1.0])
        assert abs(ld - (-LOG_2PI - 2.0)) < 1e-12
        assert abs(mahalanobis_sq(model, [2.0, 1.0]) - 4.0) < 1e-12

    def test_rejects_non_finite(self):
        model = build_model(np.zeros(2), np.eye(2))
        with pytest.raises(NonFiniteInput):
            log_density(model, [np.nan, 0.0])

    def test_mahalanobis_nonnegative_zero_only_at_mean(self):
        rng = np.random.default_rng(4)
        model = build_model(rng.standard_normal(7), random_spd(rng, 7))
        assert mahalanobis_sq(model, model.omega) == 0.0
        for _ in range(200):
            x = model.omega + rng.standard_normal(7)
            assert mahalanobis_sq(model, x) > 0.0

    def test_density_is_maximal_at_the_mean(self):
        rng = np.random.default_rng(5)
        model = build_model(rng.standard_normal(7), random_spd(rng, 7))
        peak = log_density(model, model.omega)
        for _ in range(1000):
            x = model.omega + rng.standard_normal(7) * 3.0
            assert log_density(model, x) <= peak

    def test_ridge_continuity(self):
        rng = np.random.default_rng(6)
        sigma = random_spd(rng, 7)
        omega = rng.standard_normal(7)
        lam = 1e-10 * np.trace(sigma) / 7
        base = build_model(omega, sigma, ridge_lambda=0.0)
        lifted = build_model(omega, sigma, ridge_lambda=lam)
        for _ in range(100):
            x = omega + rng.standard_normal(7) * 2.0
            assert abs(log_density(base, x) - log_density(lifted, x)) < 1e-6


class TestCalibrate:
    def _model_for(self, rows):
        return fit(TrainingMatrix(rows), ridge_lambda=0.0)

    def test_minimum_rule(self):
        rng = np.random.default_rng(7)
        data = rng.standard_normal((20, 2))
        model = self._model_for(data)
        val = TrainingMatrix(rng.standard_normal((3, 2)))
        densities = sorted(log_density(model, row) for row in val.X)
        calibrated = calibrate_threshold(model, val, quantile=1.0, margin_log=0.0)
        assert calibrated.epsilon_log == densities[0]
        with_margin = calibrate_threshold(model, val, quantile=1.0, margin_log=math.log(10))
        assert rel_close(with_margin.epsilon_log, densities[0] - math.log(10), rel=1e-12)

    def test_quantile_order_statistic(self):
        rng = np.random.default_rng(8)
        model = self._model_for(rng.standard_normal((50, 2)))
        val = TrainingMatrix(rng.standard_normal((72, 2)))
        calibrated = calibrate_threshold(model, val, quantile=0.99, margin_log=0.0)
        densities = sorted(log_density(model, row) for row in val.X)
        # brute-force sort: threshold is an order statistic, at most 1 of 72 below
        assert calibrated.epsilon_log in densities
        below = sum(1 for d in densities if d < calibrated.epsilon_log)
        assert below <= 1

    def test_larger_validation_sets_step_the_order_statistic(self):
        rng = np.random.default_rng(9)
        model = self._model_for(rng.standard_normal((50, 2)))
        val = TrainingMatrix(rng.standard_normal((200, 2)))
        calibrated = calibrate_threshold(model, val, quantile=0.99, margin_log=0.0)
        densities = sorted(log_density(model, row) for row in val.X)
        assert calibrated.epsilon_log == densities[1]  # ceil(0.01 * 200) = 2

    def test_empty_validation(self):
        model = self._model_for(np.random.default_rng(10).standard_normal((20, 2)))
        with pytest.raises(EmptyValidation):
            calibrate_threshold(model, None)

    def test_quantile_bounds(self):
        rng = np.random.default_rng(11)
        model = self._model_for(rng.standard_normal((20, 2)))
        val = TrainingMatrix(rng.standard_normal((5, 2)))
        with pytest.raises(ValueError):
            calibrate_threshold(model, val, quantile=0.0)
        with pytest.raises(ValueError):
            calibrate_threshold(model, val, quantile=1.5)
        with pytest.raises(ValueError):
            calibrate_threshold(model, val, margin_log=-1.0)


class TestClassify:
    def test_peak_is_healthy(self):
        model = build_model(np.zeros(7), np.eye(7), epsilon_log=-10.0)
        verdict = classify(model, np.zeros(7))
        assert verdict.label is Label.HEALTHY

    def test_far_point_is_damaged(self):
        model = build_model(np.zeros(7), np.eye(7), epsilon_log=-20.0)
        x = np.zeros(7)
        x[0] = 10.0  # squared Mahalanobis distance 100
        verdict = classify(model, x)
        assert verdict.label is Label.DAMAGED
        assert abs(verdict.log_density - (-3.5 * LOG_2PI - 50.0)) < 1e-9

    def test_boundary_is_healthy(self):
        model = build_model(np.zeros(2), np.eye(2))
        x = np.array([1.0, 0.5])
        exact = log_density(model, x)
        verdict = classify(replace(model, epsilon_log=exact), x)
        assert verdict.label is Label.HEALTHY  # rule is strictly below

    def test_uncalibrated_model_refuses(self):
        model = build_model(np.zeros(2), np.eye(2))
        with pytest.raises(UncalibratedModel):
            classify(model, np.zeros(2))

    def test_feature_vector_carries_window_index(self):
        fv = compute_features(np.random.default_rng(12).standard_normal(32), window_index=9)
        model = build_model(fv.as_array(), np.eye(7), epsilon_log=-1e9, window_spec=None)
        verdict = classify(model, fv, node_id="n3")
        assert verdict.window_index == 9
        assert verdict.node_id == "n3"

    def test_lowering_threshold_never_flips_healthy_to_damaged(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            model = build_model(
                rng.standard_normal(7),
                random_spd(rng, 7),
                epsilon_log=float(rng.uniform(-40, -5)),
            )
            x = model.omega + rng.standard_normal(7) * 2.0
            before = classify(model, x).label
            lowered = replace(model, epsilon_log=model.epsilon_log - float(rng.uniform(0, 10)))
            after = classify(lowered, x).label
            if before is Label.HEALTHY:
                assert after is Label.HEALTHY

    def test_log_space_agrees_with_linear_space(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            model = build_model(rng.standard_normal(2), random_spd(rng, 2), epsilon_log=-8.0)
            x = model.omega + rng.standard_normal(2) * 3.0
            ld = log_density(model, x)
            p = math.exp(ld)
            if p == 0.0:
                continue  # underflow: linear space has no information left
            linear_damaged = p < math.exp(model.epsilon_log)
            assert linear_damaged == (classify(model, x).label is Label.DAMAGED)
