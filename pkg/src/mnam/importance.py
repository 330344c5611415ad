"""Sensitivity-based global feature importance.

A feature's score is the root-mean-square of the model's input gradient
over the training rows, rescaled so that all scores sum to 100.  For the
additive model the gradient with respect to feature j is just the shape
derivative f_j'(x_j), evaluated analytically; for the fully-connected
baseline the full multivariate input gradient is used, and for logistic
regression the scores reduce to normalized absolute coefficients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .baselines import FcnnModel, LrModel, fcnn_input_grads
from .errors import DegenerateImportanceError
from .model import NamModel
from .subnet import subnet_input_grad

__all__ = ["ImportanceReport", "feature_importance", "top_k_cumulative"]


@dataclass
class ImportanceReport:
    """Per-feature scores summing to 100, with a descending-order index."""

    names: list[str]
    scores: np.ndarray
    order: np.ndarray

    def to_dict(self) -> dict:
        return {
            "scores": {name: float(s) for name, s in zip(self.names, self.scores)},
            "ranking": [self.names[i] for i in self.order],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = ["feature,importance"]
        for i in self.order:
            lines.append(f"{self.names[i]},{float(self.scores[i])!r}")
        return "\n".join(lines) + "\n"


def _input_gradient_rms(model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, NamModel):
        cols = [subnet_input_grad(net, X[:, i]) for i, net in enumerate(model.subnets)]
        grads = np.column_stack(cols)
    elif isinstance(model, FcnnModel):
        grads = fcnn_input_grads(model, X)
    elif isinstance(model, LrModel):
        grads = np.broadcast_to(model.coefficients, X.shape)
    else:
        raise TypeError(f"no input-gradient rule for {type(model).__name__}")
    return np.sqrt(np.mean(grads ** 2, axis=0))


def feature_importance(model, data) -> ImportanceReport:
    """Root-mean-square input gradients over rows, normalized to sum 100."""
    X = np.asarray(data.features, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("importance needs a nonempty feature matrix")
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"model has {model.n_features} features, data has {X.shape[1]}"
        )
    rms = _input_gradient_rms(model, X)
    total = rms.sum()
    if total == 0.0:
        raise DegenerateImportanceError(
            "all input gradients are zero; importance scores are undefined"
        )
    scores = 100.0 * rms / total
    order = np.argsort(-scores, kind="mergesort")
    names = [m.name for m in model.features]
    return ImportanceReport(names, scores, order)


def top_k_cumulative(report: ImportanceReport, mass: float) -> list[int]:
    """Smallest prefix of the ranking whose scores reach mass * 100.

    Returns feature indices in descending-importance order.
    """
    if not 0.0 < mass <= 1.0:
        raise ValueError("mass must lie in (0, 1]")
    target = 100.0 * mass
    picked: list[int] = []
    running = 0.0
    for i in report.order:
        picked.append(int(i))
        running += float(report.scores[i])
        if running >= target - 1e-12:
            break
    return picked
