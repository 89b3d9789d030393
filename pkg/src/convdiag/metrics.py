"""Evaluation metrics: one-vs-rest classification scores and the
regression error suite.

Precision, recall and accuracy follow the one-vs-rest convention with a
configurable positive class, defaulting to class 0 (the first class is
positive, all others negative). An empty denominator never degrades to
a silent zero: the metric is reported as None and rendered "undefined".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class ClassificationReport:
    accuracy: float
    precision: Optional[float]  # None when TP+FP == 0
    recall: Optional[float]     # None when TP+FN == 0
    confusion_matrix: list      # [N][N] counts, rows = truth, cols = prediction
    positive_class: int
    correct: int
    total: int
    kind: str = field(default="classification", init=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "positive_class": self.positive_class,
            "correct": self.correct,
            "total": self.total,
            "confusion_matrix": self.confusion_matrix,
        }


@dataclass
class RegressionReport:
    mse: float
    mae: float
    r2: Optional[float]  # None when the targets have zero variance
    rmse: float
    total: int
    kind: str = field(default="regression", init=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mse": self.mse,
            "mae": self.mae,
            "r2": self.r2,
            "rmse": self.rmse,
            "total": self.total,
        }


def one_vs_rest_counts(predictions, labels, positive_class: int) -> ConfusionCounts:
    predictions = np.asarray(predictions, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    pred_pos = predictions == positive_class
    true_pos = labels == positive_class
    return ConfusionCounts(
        tp=int(np.sum(pred_pos & true_pos)),
        fp=int(np.sum(pred_pos & ~true_pos)),
        fn=int(np.sum(~pred_pos & true_pos)),
        tn=int(np.sum(~pred_pos & ~true_pos)),
    )


def classification_metrics(predictions, labels, positive_class: int = 0,
                           n_classes: Optional[int] = None) -> ClassificationReport:
    """Accuracy/precision/recall plus the full N x N confusion matrix.

    Multi-way problems are scored one-vs-rest against positive_class.
    """
    predictions = np.asarray(predictions, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    q = labels.size
    if q == 0 or predictions.size != q:
        raise DataError(f"need matching non-empty arrays, got {predictions.size} "
                        f"predictions and {q} labels")
    if n_classes is None:
        n_classes = int(max(predictions.max(), labels.max())) + 1
    for name, values in (("predictions", predictions), ("labels", labels)):
        if values.min() < 0 or values.max() >= n_classes:
            raise DataError(f"{name} outside [0, {n_classes})")
    if not 0 <= positive_class < n_classes:
        raise DataError(f"positive_class {positive_class} outside [0, {n_classes})")

    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (labels, predictions), 1)

    counts = one_vs_rest_counts(predictions, labels, positive_class)
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    correct = int(np.sum(predictions == labels))
    return ClassificationReport(
        accuracy=(counts.tp + counts.tn) / q,
        precision=precision,
        recall=recall,
        confusion_matrix=matrix.tolist(),
        positive_class=positive_class,
        correct=correct,
        total=q,
    )


def regression_metrics(estimates, targets) -> RegressionReport:
    """MSE, MAE, RMSE = sqrt(MSE), and R^2 = 1 - SS_res / SS_tot."""
    estimates = np.asarray(estimates, dtype=np.float64).reshape(-1)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if estimates.shape != targets.shape or estimates.size == 0:
        raise DataError(f"need matching non-empty arrays, got {estimates.size} "
                        f"estimates and {targets.size} targets")
    residual = targets - estimates
    mse = float(residual @ residual) / targets.size
    mae = float(np.abs(residual).mean())
    centered = targets - targets.mean()
    ss_tot = float(centered @ centered)
    r2 = 1.0 - (residual @ residual) / ss_tot if ss_tot > 0.0 else None
    return RegressionReport(mse=mse, mae=mae, r2=r2, rmse=math.sqrt(mse),
                            total=targets.size)


def _pct(value: Optional[float]) -> str:
    return "undefined" if value is None else f"{value * 100:.2f}%"


def format_report(report, task: str = "") -> str:
    """Aligned plain-text table: Accuracy/Precision/Recall for
    classification, MSE/MAE/R2/RMSE for regression."""
    label = task or report.kind
    if report.kind == "classification":
        acc = f"{_pct(report.accuracy)} ({report.correct}/{report.total})"
        header = f"{'Task':<28}{'Accuracy':<22}{'Precision':<12}{'Recall':<12}"
        row = f"{label:<28}{acc:<22}{_pct(report.precision):<12}{_pct(report.recall):<12}"
        lines = [header, row, "", "Confusion matrix (rows = truth, cols = prediction):"]
        width = max(5, len(str(report.total)) + 1)
        for truth_row in report.confusion_matrix:
            lines.append("".join(f"{c:>{width}}" for c in truth_row))
        return "\n".join(lines)
    r2 = "undefined" if report.r2 is None else f"{report.r2:.4f}"
    header = f"{'Task':<28}{'MSE':<14}{'MAE':<14}{'R2':<14}{'RMSE':<14}"
    row = (f"{label:<28}{report.mse:<14.6g}{report.mae:<14.6g}"
           f"{r2:<14}{report.rmse:<14.6g}")
    return "\n".join([header, row])


def report_to_json(report, **extra) -> str:
    payload = report.to_dict()
    payload.update(extra)
    return json.dumps(payload, indent=2)
