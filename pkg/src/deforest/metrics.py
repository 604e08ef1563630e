"""Segmentation evaluation metrics and training losses.

Class 1 (deforested) is the positive class throughout.  When a mask pair has
no positives at all (tp + fp + fn = 0), F1 and IoU are defined as 1: an
all-negative tile predicted all-negative is a success.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .raster import BinaryMask, ProbabilityMask

BCE_EPSILON = 1e-7
DICE_SMOOTHING = 1.0


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )


def confusion(pred: BinaryMask, truth: BinaryMask) -> ConfusionCounts:
    """Pixel confusion counts of a predicted mask against ground truth."""
    if pred.values.shape != truth.values.shape:
        raise ValueError(
            f"dimension mismatch: pred {pred.values.shape} vs truth {truth.values.shape}"
        )
    p = pred.values == 1
    t = truth.values == 1
    return ConfusionCounts(
        tp=int(np.count_nonzero(p & t)),
        fp=int(np.count_nonzero(p & ~t)),
        fn=int(np.count_nonzero(~p & t)),
        tn=int(np.count_nonzero(~p & ~t)),
    )


def pixel_accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValueError("empty masks have no accuracy")
    return (c.tp + c.tn) / c.total


def f1(c: ConfusionCounts) -> float:
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        return 1.0
    return 2 * c.tp / denom


def iou(c: ConfusionCounts) -> float:
    denom = c.tp + c.fp + c.fn
    if denom == 0:
        return 1.0
    return c.tp / denom


def _check_same_shape(p: ProbabilityMask, y: BinaryMask) -> None:
    if p.values.shape != y.values.shape:
        raise ValueError(
            f"dimension mismatch: probabilities {p.values.shape} vs labels {y.values.shape}"
        )


def bce_loss(p: ProbabilityMask, y: BinaryMask) -> float:
    """Mean binary cross-entropy with probabilities clamped away from 0 and 1."""
    _check_same_shape(p, y)
    prob = np.clip(p.values.astype(np.float64), BCE_EPSILON, 1.0 - BCE_EPSILON)
    label = y.values.astype(np.float64)
    terms = label * np.log(prob) + (1.0 - label) * np.log(1.0 - prob)
    return float(-terms.mean())


def dice_loss(p: ProbabilityMask, y: BinaryMask) -> float:
    """Soft Dice loss with additive smoothing."""
    _check_same_shape(p, y)
    prob = p.values.astype(np.float64)
    label = y.values.astype(np.float64)
    inter = float((prob * label).sum())
    total = float(prob.sum() + label.sum())
    return 1.0 - (2.0 * inter + DICE_SMOOTHING) / (total + DICE_SMOOTHING)


def combined_loss(p: ProbabilityMask, y: BinaryMask) -> float:
    """Unweighted sum of BCE and Dice, the class-imbalance-aware training loss."""
    return bce_loss(p, y) + dice_loss(p, y)


@dataclass(frozen=True)
class QueryMetrics:
    query: Dict[str, object]
    counts: ConfusionCounts

    def to_json(self) -> dict:
        return {
            "query": self.query,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "tn": self.counts.tn,
            "accuracy": pixel_accuracy(self.counts),
            "f1": f1(self.counts),
            "iou": iou(self.counts),
        }


@dataclass(frozen=True)
class EvalReport:
    """Per-query metrics plus corpus aggregates.

    `aggregate` pools the confusion counts over all queries (micro);
    `aggregate_macro` is the plain mean of the per-query values.
    """

    per_query: Tuple[QueryMetrics, ...]

    def pooled(self) -> ConfusionCounts:
        total = ConfusionCounts(0, 0, 0, 0)
        for q in self.per_query:
            total = total + q.counts
        return total

    def to_json(self) -> dict:
        pooled = self.pooled()
        doc = {
            "queries": [q.to_json() for q in self.per_query],
            "aggregate": {
                "accuracy": pixel_accuracy(pooled) if pooled.total else None,
                "f1": f1(pooled),
                "iou": iou(pooled),
            },
        }
        if self.per_query:
            entries = [q.to_json() for q in self.per_query]
            doc["aggregate_macro"] = {
                "accuracy": sum(e["accuracy"] for e in entries) / len(entries),
                "f1": sum(e["f1"] for e in entries) / len(entries),
                "iou": sum(e["iou"] for e in entries) / len(entries),
            }
        else:
            doc["aggregate_macro"] = None
        return doc
