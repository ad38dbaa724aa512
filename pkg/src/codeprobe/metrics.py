"""Confusion-matrix metrics: MCC (binary and multi-class) and macro-F1."""
from __future__ import annotations

import warnings

import numpy as np


def confusion_matrix(y_true, y_pred, class_count: int) -> np.ndarray:
    """Rows = true class, columns = predicted class."""
    matrix = np.zeros((class_count, class_count), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        t, p = int(t), int(p)
        if not (0 <= t < class_count and 0 <= p < class_count):
            raise ValueError(
                f"label ({t}, {p}) outside [0, {class_count})"
            )
        matrix[t, p] += 1
    return matrix


def binary_mcc(tp: float, tn: float, fp: float, fn: float) -> float:
    """MCC from binary confusion counts; 0 when the denominator vanishes."""
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        warnings.warn("MCC denominator is zero; reporting 0", stacklevel=2)
        return 0.0
    return float((tp * tn - fp * fn) / np.sqrt(denom))


def matthews_corrcoef(confusion: np.ndarray) -> float:
    """Generalized multi-class MCC (the R_k statistic) over a confusion matrix.

    Coincides with the binary formula for 2x2 matrices; 0 when either
    marginal has no variance.
    """
    confusion = np.asarray(confusion, dtype=np.float64)
    t = confusion.sum(axis=1)  # true-class totals
    p = confusion.sum(axis=0)  # predicted-class totals
    c = np.trace(confusion)
    s = confusion.sum()
    numerator = c * s - float(t @ p)
    denom_sq = (s * s - float(p @ p)) * (s * s - float(t @ t))
    if denom_sq <= 0:
        warnings.warn("MCC denominator is zero; reporting 0", stacklevel=2)
        return 0.0
    return float(numerator / np.sqrt(denom_sq))


def per_class_precision_recall(confusion: np.ndarray) -> list[tuple[float, float]]:
    """(precision, recall) per class; 0 where a marginal is empty."""
    confusion = np.asarray(confusion, dtype=np.float64)
    out = []
    for k in range(confusion.shape[0]):
        tp = confusion[k, k]
        predicted = confusion[:, k].sum()
        actual = confusion[k, :].sum()
        precision = float(tp / predicted) if predicted > 0 else 0.0
        recall = float(tp / actual) if actual > 0 else 0.0
        out.append((precision, recall))
    return out


def macro_f1(confusion: np.ndarray) -> float:
    """Unweighted mean of per-class F1 scores (F1 = 0 for absent classes)."""
    scores = []
    for precision, recall in per_class_precision_recall(confusion):
        if precision + recall == 0:
            scores.append(0.0)
        else:
            scores.append(2 * precision * recall / (precision + recall))
    return float(np.mean(scores)) if scores else 0.0
