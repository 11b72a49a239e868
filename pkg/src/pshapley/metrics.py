"""Probabilistic performance measures and weighted drop metrics.

A removal curve records (accuracy, Brier score, cross-entropy) on a fixed
validation set after each successive removal of the currently highest-valued
training point, retraining from scratch each round. The weighted drop metrics
aggregate the per-round change with weight 1/j on round j, so a valuation
method scores high when it front-loads performance-critical points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .model import LogisticModel

__all__ = [
    "CE_PROB_FLOOR",
    "RoundMetrics",
    "RemovalCurve",
    "brier_from_probs",
    "cross_entropy_from_probs",
    "brier_score",
    "cross_entropy",
    "weighted_drop",
    "wad",
    "wbd",
    "wcd",
    "curve_to_csv",
    "curve_from_csv",
]

# probabilities are clamped here before logs so saturated or degenerate models
# yield large-but-finite cross-entropy instead of poisoning the drop sums
CE_PROB_FLOOR = 1e-12


def brier_from_probs(labels, probs) -> float:
    """Mean squared difference between class-1 probabilities and labels."""
    y = np.asarray(labels, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if y.size == 0:
        raise ValueError("need at least one point")
    terms = y * (p - y) + (1.0 - y) * p
    return float(np.mean(terms * terms))


def cross_entropy_from_probs(labels, probs) -> float:
    """Summed (not averaged) negative log-likelihood with clamped probabilities.

    Probabilities are clipped to [1e-12, 1 - 1e-12] first, so raw 0/1 inputs
    produce finite values.
    """
    y = np.asarray(labels, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if y.size == 0:
        raise ValueError("need at least one point")
    p = np.clip(p, CE_PROB_FLOOR, 1.0 - CE_PROB_FLOOR)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def brier_score(model: LogisticModel, validation: Dataset) -> float:
    """Brier score of the model's class-1 probabilities on the validation set."""
    if validation.n < 1:
        raise ValueError("validation set must be nonempty")
    return brier_from_probs(validation.labels, model.predict_proba_batch(validation.features))


def cross_entropy(model: LogisticModel, validation: Dataset) -> float:
    """Summed cross-entropy of the model on the validation set (clamped logs)."""
    if validation.n < 1:
        raise ValueError("validation set must be nonempty")
    return cross_entropy_from_probs(
        validation.labels, model.predict_proba_batch(validation.features)
    )


@dataclass(frozen=True)
class RoundMetrics:
    """Validation metrics of the model trained on one removal round's remainder."""

    accuracy: float
    brier: float
    cross_entropy: float


@dataclass
class RemovalCurve:
    """Metric trajectory over progressive removal.

    ``rounds[0]`` is the full training set; ``rounds[i]`` is after the first i
    removals in ``removal_order``. ``validation_fingerprint`` ties the curve to
    the split it was computed on (optional for hand-built curves).
    """

    rounds: list[RoundMetrics]
    removal_order: list[int]
    validation_fingerprint: str | None = field(default=None)

    def __post_init__(self):
        if len(self.rounds) != len(self.removal_order) + 1:
            raise ValueError(
                f"expected {len(self.removal_order) + 1} rounds for "
                f"{len(self.removal_order)} removals, got {len(self.rounds)}"
            )
        if len(set(self.removal_order)) != len(self.removal_order):
            raise ValueError("removal_order contains duplicate ids")

    def series(self, metric: str) -> list[float]:
        return [getattr(r, metric) for r in self.rounds]


def weighted_drop(series, *, invert: bool = False) -> float:
    """Sum over rounds j >= 1 of (series[0] - series[j]) / j.

    Telescoped form of the double sum
    sum_j (1/j) * sum_{i<=j} (series[i-1] - series[i]); ``invert`` flips the
    sign for metrics where larger means worse.
    """
    values = [float(v) for v in series]
    if len(values) < 2:
        raise ValueError("need at least 2 rounds (one removal)")
    total = 0.0
    for j in range(1, len(values)):
        total += (values[0] - values[j]) / j
    return -total if invert else total


def wad(curve: RemovalCurve) -> float:
    """Weighted accuracy drop; positive when removals hurt accuracy early."""
    return weighted_drop(curve.series("accuracy"))


def wbd(curve: RemovalCurve) -> float:
    """Weighted Brier score drop; sign flipped since larger Brier is worse."""
    return weighted_drop(curve.series("brier"), invert=True)


def wcd(curve: RemovalCurve) -> float:
    """Weighted cross-entropy drop; sign flipped like :func:`wbd`."""
    return weighted_drop(curve.series("cross_entropy"), invert=True)


def curve_to_csv(curve: RemovalCurve, path) -> None:
    """Plot-ready CSV: round, removed_id, accuracy, brier, cross_entropy."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "removed_id", "accuracy", "brier", "cross_entropy"])
        for i, r in enumerate(curve.rounds):
            removed = "" if i == 0 else str(curve.removal_order[i - 1])
            writer.writerow(
                [i, removed, repr(r.accuracy), repr(r.brier), repr(r.cross_entropy)]
            )


def curve_from_csv(path, validation_fingerprint: str | None = None) -> RemovalCurve:
    rounds: list[RoundMetrics] = []
    order: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rounds.append(
                RoundMetrics(
                    accuracy=float(row["accuracy"]),
                    brier=float(row["brier"]),
                    cross_entropy=float(row["cross_entropy"]),
                )
            )
            if row["removed_id"]:
                order.append(int(row["removed_id"]))
    return RemovalCurve(
        rounds=rounds, removal_order=order, validation_fingerprint=validation_fingerprint
    )
