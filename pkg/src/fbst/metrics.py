"""Scoring of testing output against binary ground truth.

Significant is the positive class throughout: precision/recall/F1 for
global decisions, ROC/AUC for instance-wise scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_counts(labels, predictions) -> ConfusionCounts:
    labels = np.asarray(labels).astype(bool)
    predictions = np.asarray(predictions).astype(bool)
    if labels.shape != predictions.shape:
        raise ValueError(
            f"labels and predictions differ in shape: {labels.shape} vs "
            f"{predictions.shape}"
        )
    return ConfusionCounts(
        tp=int(np.count_nonzero(labels & predictions)),
        fp=int(np.count_nonzero(~labels & predictions)),
        tn=int(np.count_nonzero(~labels & ~predictions)),
        fn=int(np.count_nonzero(labels & ~predictions)),
    )


class PrecisionRecallF1(NamedTuple):
    precision: float
    recall: float
    f1: float
    degenerate: bool  # True when any denominator was zero


def precision_recall_f1(labels, predictions) -> PrecisionRecallF1:
    """precision = TP/(TP+FP), recall = TP/(TP+FN), F1 their harmonic mean;
    zero denominators yield 0 and set the degenerate flag."""
    counts = confusion_counts(labels, predictions)
    degenerate = False
    if counts.tp + counts.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    if precision + recall == 0.0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return PrecisionRecallF1(precision, recall, f1, degenerate)


@dataclass
class RocCurve:
    """Threshold sweep plus the trapezoidal area under it.

    The AUC equals the probability that a random positive outscores a
    random negative, ties counting one half.
    """

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float


def roc_auc(labels, scores) -> RocCurve:
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ValueError("labels and scores must be matching 1-d arrays")
    n_pos = int(np.count_nonzero(labels))
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # thresholds at the end of each tied-score group
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    cut = np.concatenate([distinct, [labels.shape[0] - 1]])
    tp = np.cumsum(sorted_labels)[cut]
    fp = (cut + 1) - tp
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    thresholds = np.concatenate([[np.inf], sorted_scores[cut]])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds=thresholds, tpr=tpr, fpr=fpr, auc=auc)
