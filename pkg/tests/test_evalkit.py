import numpy as np
import pytest

from indde import (
    ConfusionMatrix,
    Label,
    TrainingMatrix,
    Verdict,
    confusion,
    export_feature_diagnostics,
    metrics,
)
from indde.errors import EmptyMatrix, LengthMismatch

H, D = Label.HEALTHY, Label.DAMAGED


class TestConfusion:
    def test_node_one_counts(self):
        predicted = [H] * 72 + [D] * 275 + [H] * 13
        truth = [H] * 72 + [D] * 288
        cm = confusion(predicted, truth)
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == (72, 275, 13, 0)

    def test_empty_inputs(self):
        cm = confusion([], [])
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == (0, 0, 0, 0)

    def test_everything_wrong(self):
        predicted = [D] * 10 + [H] * 10
        truth = [H] * 10 + [D] * 10
        cm = confusion(predicted, truth)
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == (0, 0, 10, 10)

    def test_accepts_verdicts_and_strings(self):
        verdicts = [Verdict(0, -1.0, H), Verdict(1, -99.0, D)]
        cm = confusion(verdicts, ["Healthy", "Damaged"])
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == (1, 1, 0, 0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([H], [H, D])

    def test_row_totals_match_truth_counts(self):
        rng = np.random.default_rng(0)
        predicted = [H if x < 0.6 else D for x in rng.random(500)]
        truth = [H if x < 0.5 else D for x in rng.random(500)]
        cm = confusion(predicted, truth)
        assert cm.tp + cm.fn == truth.count(H)
        assert cm.tn + cm.fp == truth.count(D)


class TestMetrics:
    def test_node_one_measures(self):
        rep = metrics(ConfusionMatrix(tp=72, tn=275, fp=13, fn=0))
        assert abs(rep.accuracy - 347 / 360) < 1e-12
        assert abs(rep.precision - 72 / 85) < 1e-12
        assert rep.recall == 1.0
        assert abs(rep.type1_error - 13 / 288) < 1e-12
        assert rep.type2_error == 0.0
        assert abs(rep.f_score - 2 * (72 / 85) / (72 / 85 + 1)) < 1e-12

    def test_perfect_classifier(self):
        rep = metrics(ConfusionMatrix(tp=1, tn=1, fp=0, fn=0))
        assert (rep.accuracy, rep.precision, rep.recall, rep.f_score) == (1, 1, 1, 1)
        assert (rep.type1_error, rep.type2_error) == (0, 0)

    def test_worst_case(self):
        rep = metrics(ConfusionMatrix(tp=0, tn=0, fp=5, fn=5))
        assert rep.accuracy == 0.0
        assert rep.precision == 0.0
        assert rep.recall == 0.0
        assert rep.f_score is None  # 0/0
        assert rep.type1_error == 1.0
        assert rep.type2_error == 1.0

    def test_undefined_ratios_are_none_not_zero_or_one(self):
        rep = metrics(ConfusionMatrix(tp=0, tn=5, fp=0, fn=0))
        assert rep.precision is None
        assert rep.recall is None
        assert rep.f_score is None
        assert rep.type2_error is None
        assert rep.type1_error == 0.0

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            metrics(ConfusionMatrix())

    def test_accuracy_complement_identity(self):
        from fractions import Fraction

        rng = np.random.default_rng(1)
        for _ in range(50):
            tp, tn, fp, fn = (int(x) for x in rng.integers(0, 40, size=4))
            cm = ConfusionMatrix(tp, tn, fp, fn)
            if cm.total == 0:
                continue
            rep = metrics(cm)
            # exact in rational arithmetic, within an ulp in float
            assert Fraction(tp + tn, cm.total) == 1 - Fraction(fp + fn, cm.total)
            assert abs(rep.accuracy - (1 - (fp + fn) / cm.total)) < 1e-15

    def test_measures_stay_in_unit_interval(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            tp, tn, fp, fn = (int(x) for x in rng.integers(0, 25, size=4))
            cm = ConfusionMatrix(tp, tn, fp, fn)
            if cm.total == 0:
                continue
            rep = metrics(cm)
            for value in (
                rep.accuracy,
                rep.precision,
                rep.recall,
                rep.f_score,
                rep.type1_error,
                rep.type2_error,
            ):
                if value is not None:
                    assert 0.0 <= value <= 1.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        predicted = [H if x < 0.8 else D for x in rng.random(300)]
        truth = [H if x < 0.5 else D for x in rng.random(300)]
        rep = metrics(confusion(predicted, truth))
        order = rng.permutation(300)
        rep_shuffled = metrics(
            confusion([predicted[i] for i in order], [truth[i] for i in order])
        )
        assert rep == rep_shuffled


class TestFeatureDiagnostics:
    def test_single_row(self):
        row = np.arange(1.0, 8.0)
        summaries = export_feature_diagnostics(TrainingMatrix([row]))
        assert len(summaries) == 7
        for j, s in enumerate(summaries):
            assert s.mean == row[j]
            assert s.std == 0.0
            assert s.minimum == s.maximum == row[j]
            assert all(d == row[j] for d in s.deciles)

    def test_decile_order_statistics(self):
        column = np.arange(1.0, 11.0)
        X = TrainingMatrix(np.column_stack([column, np.ones(10)]))
        summaries = export_feature_diagnostics(X)
        assert summaries[0].deciles == tuple(float(v) for v in range(1, 11))
        assert summaries[0].minimum == 1.0
        assert summaries[0].maximum == 10.0

    def test_standard_normal_columns(self):
        rng = np.random.default_rng(0)
        X = TrainingMatrix(rng.standard_normal((1000, 7)))
        for s in export_feature_diagnostics(X):
            assert abs(s.mean) < 0.1
            assert 0.9 < s.std < 1.1

    def test_feature_names(self):
        rng = np.random.default_rng(5)
        names = [s.name for s in export_feature_diagnostics(TrainingMatrix(rng.random((3, 7))))]
        assert names == [
            "mean",
            "mean_square",
            "variance",
            "std_dev",
            "skewness",
            "kurtosis",
            "crest_factor",
        ]
        generic = [s.name for s in export_feature_diagnostics(TrainingMatrix(rng.random((3, 2))))]
        assert generic == ["f1", "f2"]
