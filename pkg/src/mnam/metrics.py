"""Classification error, AUC, and confusion counts.

AUC is the Mann-Whitney statistic: the fraction of (positive, negative)
pairs ranked correctly, with ties worth half credit.  It is computed from
average ranks in O(n log n) rather than by enumerating pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import MnamError

__all__ = ["EvalReport", "auc", "confusion_and_error"]


class UndefinedAucError(MnamError):
    """AUC needs at least one positive and one negative label."""


@dataclass
class EvalReport:
    classification_error: float
    auc: float
    tp: int
    fn: int
    fp: int
    tn: int
    threshold: float

    @property
    def n(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def to_dict(self) -> dict:
        return {
            "classification_error": self.classification_error,
            "auc": self.auc,
            "confusion": {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn},
            "threshold": self.threshold,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        """Aligned table in the usual confusion-matrix layout."""
        rows = [
            ("", "Predicted: Default", "Predicted: Not default"),
            ("Actual: Default", str(self.tp), str(self.fn)),
            ("Actual: Not default", str(self.fp), str(self.tn)),
        ]
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                 for row in rows]
        lines.append(f"classification error: {100.0 * self.classification_error:.2f}%")
        auc_txt = "undefined" if np.isnan(self.auc) else f"{100.0 * self.auc:.2f}%"
        lines.append(f"AUC: {auc_txt}")
        lines.append(f"threshold: {self.threshold}")
        return "\n".join(lines) + "\n"


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    starts = np.flatnonzero(np.r_[True, sx[1:] != sx[:-1]])
    ends = np.r_[starts[1:], len(x)]
    # mean of ranks start+1 .. end within each tie group
    group_rank = 0.5 * (starts + ends + 1)
    ranks = np.empty(len(x))
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative (ties: 1/2)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"scores and labels differ in length: {scores.shape} vs {labels.shape}")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError("AUC undefined: both classes must be present")
    ranks = _average_ranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion_and_error(probas, labels, threshold: float = 0.5) -> EvalReport:
    """Tally the confusion matrix at a threshold (default when proba >= 0.5).

    AUC is included when both classes are present and NaN otherwise, since
    the ranking statistic has no meaning for single-class labels.
    """
    probas = np.asarray(probas, dtype=float)
    labels = np.asarray(labels)
    if probas.shape != labels.shape:
        raise ValueError(f"probas and labels differ in length: {probas.shape} vs {labels.shape}")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    pred = probas >= threshold
    actual = labels == 1
    tp = int(np.sum(pred & actual))
    fn = int(np.sum(~pred & actual))
    fp = int(np.sum(pred & ~actual))
    tn = int(np.sum(~pred & ~actual))
    n = len(labels)
    error = (fn + fp) / n
    try:
        area = auc(probas, labels)
    except UndefinedAucError:
        area = float("nan")
    return EvalReport(error, area, tp, fn, fp, tn, threshold)
