import json
import math

import numpy as np
import pytest

from convdiag.errors import DataError
from convdiag.metrics import (classification_metrics, format_report,
                              one_vs_rest_counts, regression_metrics,
                              report_to_json)
from helpers import counting_metrics_oracle, regression_oracle


class TestClassificationMetrics:
    def test_all_correct_132(self):
        labels = [i % 3 for i in range(132)]
        report = classification_metrics(labels, labels, positive_class=0)
        assert report.accuracy == 1.0
        assert report.precision == 1.0
        assert report.recall == 1.0
        assert report.correct == 132 and report.total == 132

    def test_hand_counted_case(self):
        report = classification_metrics([0, 1, 1, 1], [0, 0, 1, 1], positive_class=0)
        counts = one_vs_rest_counts([0, 1, 1, 1], [0, 0, 1, 1], 0)
        assert (counts.tp, counts.fn, counts.fp, counts.tn) == (1, 1, 0, 2)
        assert report.precision == 1.0
        assert report.recall == 0.5
        assert report.accuracy == 0.75

    def test_degenerate_all_positive_predictions(self):
        report = classification_metrics([0, 0, 0], [1, 1, 1], positive_class=0,
                                        n_classes=2)
        assert report.precision == 0.0
        assert report.accuracy == 0.0
        assert report.recall is None  # no positives in the labels

    def test_undefined_precision_is_none_not_zero(self):
        # predictions never hit the positive class -> TP + FP == 0
        report = classification_metrics([1, 1], [0, 1], positive_class=0)
        assert report.precision is None
        assert report.precision != 0

    def test_matches_counting_oracle_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            q = int(rng.integers(1, 1001))
            n = int(rng.integers(2, 11))
            labels = rng.integers(0, n, size=q)
            predictions = rng.integers(0, n, size=q)
            positive = int(rng.integers(0, n))
            report = classification_metrics(predictions, labels,
                                            positive_class=positive, n_classes=n)
            tp, fp, fn, tn, precision, recall, accuracy = counting_metrics_oracle(
                predictions.tolist(), labels.tolist(), positive)
            counts = one_vs_rest_counts(predictions, labels, positive)
            assert (counts.tp, counts.fp, counts.fn, counts.tn) == (tp, fp, fn, tn)
            assert counts.total == q
            assert report.accuracy == accuracy
            assert report.precision == precision
            assert report.recall == recall

    def test_confusion_matrix_row_sums_are_class_counts(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 4, size=200)
        predictions = rng.integers(0, 4, size=200)
        report = classification_metrics(predictions, labels, n_classes=4)
        matrix = np.array(report.confusion_matrix)
        for c in range(4):
            assert matrix[c].sum() == int(np.sum(labels == c))
        assert matrix.trace() == report.correct

    def test_binary_trace_identity(self):
        # binary case: q * accuracy equals the confusion-matrix trace
        rng = np.random.default_rng(2)
        labels = rng.integers(0, 2, size=97)
        predictions = rng.integers(0, 2, size=97)
        report = classification_metrics(predictions, labels, n_classes=2)
        matrix = np.array(report.confusion_matrix)
        assert matrix.trace() == pytest.approx(report.total * report.accuracy)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 3, size=60)
        predictions = rng.integers(0, 3, size=60)
        order = rng.permutation(60)
        a = classification_metrics(predictions, labels, n_classes=3)
        b = classification_metrics(predictions[order], labels[order], n_classes=3)
        assert (a.accuracy, a.precision, a.recall) == (b.accuracy, b.precision, b.recall)
        assert a.confusion_matrix == b.confusion_matrix

    def test_empty_input_rejected(self):
        with pytest.raises(DataError):
            classification_metrics([], [])

    def test_out_of_range_rejected(self):
        with pytest.raises(DataError):
            classification_metrics([0, 5], [0, 1], n_classes=2)


class TestRegressionMetrics:
    def test_perfect_fit(self):
        report = regression_metrics([0.1, 0.9, 0.4], [0.1, 0.9, 0.4])
        assert report.mse == 0.0
        assert report.mae == 0.0
        assert report.rmse == 0.0
        assert report.r2 == 1.0

    def test_hand_case(self):
        report = regression_metrics([1.0, 1.0], [0.0, 2.0])
        assert report.mse == 1.0
        assert report.mae == 1.0
        assert report.rmse == 1.0
        assert report.r2 == 0.0

    def test_rmse_is_sqrt_mse(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            q = int(rng.integers(2, 50))
            report = regression_metrics(rng.normal(size=q), rng.normal(size=q))
            assert abs(report.rmse - math.sqrt(report.mse)) <= 1e-12

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            q = int(rng.integers(2, 200))
            estimates = rng.normal(size=q)
            targets = rng.normal(size=q)
            report = regression_metrics(estimates, targets)
            mse, mae, r2, rmse = regression_oracle(estimates.tolist(), targets.tolist())
            assert abs(report.mse - mse) <= 1e-12
            assert abs(report.mae - mae) <= 1e-12
            assert abs(report.r2 - r2) <= 1e-12
            assert abs(report.rmse - rmse) <= 1e-12

    def test_zero_variance_r2_undefined(self):
        report = regression_metrics([0.4, 0.6], [0.5, 0.5])
        assert report.r2 is None
        assert report.mse > 0

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            regression_metrics([0.1], [0.1, 0.2])


class TestReportFormatting:
    def test_classification_table_layout(self):
        report = classification_metrics([0, 1, 1, 1], [0, 0, 1, 1])
        text = format_report(report, task="binary classification")
        assert "Accuracy" in text and "Precision" in text and "Recall" in text
        assert "75.00% (3/4)" in text
        assert "100.00%" in text  # precision
        assert "50.00%" in text   # recall
        assert "Confusion matrix" in text

    def test_undefined_renders_as_text(self):
        report = classification_metrics([1, 1], [0, 1], positive_class=0)
        assert "undefined" in format_report(report)

    def test_regression_columns(self):
        report = regression_metrics([1.0, 1.0], [0.0, 2.0])
        text = format_report(report)
        for column in ("MSE", "MAE", "R2", "RMSE"):
            assert column in text

    def test_json_round_trip_with_null_for_undefined(self):
        report = classification_metrics([1, 1], [0, 1], positive_class=0)
        payload = json.loads(report_to_json(report))
        assert payload["precision"] is None
        assert payload["kind"] == "classification"
        assert payload["confusion_matrix"] == report.confusion_matrix
