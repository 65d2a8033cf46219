"""Confusion-matrix accumulation, overall accuracy and mean IoU."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionError, LabelMap, ParameterError


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[t][p] is the number of pixels with truth t predicted p."""

    counts: np.ndarray  # (n, n), int64

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.n != other.n:
            raise DimensionError("confusion matrices differ in class count")
        return ConfusionMatrix(self.counts + other.counts)


@dataclass(frozen=True)
class Metrics:
    oa: float
    miou: float
    per_class_iou: list[float]  # NaN for classes absent from truth and prediction


def confusion(pred: LabelMap, truth: LabelMap) -> ConfusionMatrix:
    if pred.labels.shape != truth.labels.shape:
        raise DimensionError("prediction and truth differ in shape")
    if pred.taxonomy != truth.taxonomy:
        raise DimensionError("prediction and truth use different taxonomies")
    n = truth.taxonomy.n
    flat = truth.labels.ravel().astype(np.int64) * n + pred.labels.ravel()
    counts = np.bincount(flat, minlength=n * n).reshape(n, n)
    return ConfusionMatrix(counts=counts)


def overall_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ParameterError("confusion matrix is empty")
    return float(np.trace(cm.counts) / cm.total)


def mean_iou(cm: ConfusionMatrix) -> tuple[float, list[float]]:
    """Per-class intersection over union and its mean.

    Classes absent from both truth and prediction are reported as NaN and
    excluded from the mean.
    """
    if cm.total == 0:
        raise ParameterError("confusion matrix is empty")
    diag = np.diag(cm.counts).astype(np.float64)
    denom = cm.counts.sum(axis=0) + cm.counts.sum(axis=1) - diag
    per_class = np.full(cm.n, np.nan)
    present = denom > 0
    per_class[present] = diag[present] / denom[present]
    return float(per_class[present].mean()), per_class.tolist()


def evaluate(pred: LabelMap, truth: LabelMap) -> Metrics:
    cm = confusion(pred, truth)
    miou, per_class = mean_iou(cm)
    return Metrics(oa=overall_accuracy(cm), miou=miou, per_class_iou=per_class)
