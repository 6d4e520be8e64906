"""
Evaluation metrics.

Binary tasks report ACC, F1 (positive class 1) and AUC; multiclass tasks
report ACC, support-weighted F1 and macro F1.  Both report the confusion
matrix, and binary tasks also carry F1-w / F1-m for cross-checking.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike
from sklearn.metrics import accuracy_score, confusion_matrix, f1_score, roc_auc_score

from app.errors import DimensionError, UndefinedMetricError
from app.schemas import MetricsReport, Task


def binary_auc(scores: ArrayLike, labels: ArrayLike) -> float:
    """Rank-statistic AUC; ties count one half."""
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        raise UndefinedMetricError("AUC is undefined when only one class is present.")
    return float(roc_auc_score(y, np.asarray(scores, dtype=np.float64)))


def compute_metrics(
    predictions: ArrayLike,
    scores: ArrayLike | None,
    labels: ArrayLike,
    task: Task,
    n_classes: int | None = None,
) -> MetricsReport:
    """Metrics of *predictions* against *labels*.

    *scores* are positive-class scores for binary AUC; pass ``None`` to skip AUC.
    """
    y_pred = np.asarray(predictions, dtype=np.int64)
    y_true = np.asarray(labels, dtype=np.int64)
    if y_pred.shape != y_true.shape:
        raise DimensionError(f"{y_pred.size} predictions for {y_true.size} labels.")
    n_classes = n_classes or (2 if task is Task.BINARY else int(max(y_true.max(), y_pred.max())) + 1)
    classes = list(range(n_classes))

    auc = None
    f1 = None
    if task is Task.BINARY:
        f1 = float(f1_score(y_true, y_pred, pos_label=1, average="binary", zero_division=0))
        if scores is not None:
            scores = np.asarray(scores, dtype=np.float64)
            if scores.shape != y_true.shape:
                raise DimensionError("binary AUC needs one score per sample.")
            auc = binary_auc(scores, y_true)

    return MetricsReport(
        task=task,
        n_samples=int(y_true.size),
        accuracy=float(accuracy_score(y_true, y_pred)),
        f1=f1,
        f1_weighted=float(
            f1_score(y_true, y_pred, labels=classes, average="weighted", zero_division=0)
        ),
        f1_macro=float(
            f1_score(y_true, y_pred, labels=classes, average="macro", zero_division=0)
        ),
        auc=auc,
        confusion=confusion_matrix(y_true, y_pred, labels=classes).tolist(),
    )
