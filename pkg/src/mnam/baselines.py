"""Reference models trained on the same pipeline: logistic regression with
no interactions, and a small fully-connected network.

Both share the additive models' activation math and descent machinery so
that accuracy comparisons isolate the architecture, not the training code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError
from .model import FeatureMeta
from .subnet import _sigmoid_arr, sigmoid
from .training import TrainConfig, _check_training_data, _make_optimizer, bce_loss

__all__ = [
    "LrModel",
    "FcnnModel",
    "lr_train",
    "lr_predict",
    "fcnn_train",
    "fcnn_predict",
    "fcnn_input_grads",
]


def _check_width(x: np.ndarray, p: int):
    if x.ndim not in (1, 2) or x.shape[-1] != p:
        raise ValueError(f"expected input with {p} features, got shape {x.shape}")


@dataclass
class LrModel:
    """Linear logit: w . x + b."""

    coefficients: np.ndarray
    intercept: float
    features: list[FeatureMeta] = field(default_factory=list)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if not (np.all(np.isfinite(self.coefficients)) and np.isfinite(self.intercept)):
            raise ValueError("model parameters must be finite")
        if not self.features:
            self.features = [FeatureMeta(f"x{i}", i) for i in range(len(self.coefficients))]

    @property
    def n_features(self) -> int:
        return len(self.coefficients)

    def logit(self, x):
        x = np.asarray(x, dtype=float)
        _check_width(x, self.n_features)
        return x @ self.coefficients + self.intercept

    def proba(self, x):
        return sigmoid(self.logit(x))

    def to_dict(self) -> dict:
        return {
            "kind": "lr",
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
            "features": [vars(m).copy() for m in self.features],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LrModel":
        if doc.get("kind") != "lr":
            raise ValueError(f"not an LR document (kind={doc.get('kind')!r})")
        return cls(
            np.array(doc["coefficients"], dtype=float),
            float(doc["intercept"]),
            [FeatureMeta(**m) for m in doc["features"]],
        )


@dataclass
class FcnnModel:
    """One hidden logistic layer over all features jointly."""

    input_weights: np.ndarray  # (H, p)
    hidden_biases: np.ndarray  # (H,)
    output_weights: np.ndarray  # (H,)
    output_bias: float
    features: list[FeatureMeta] = field(default_factory=list)

    def __post_init__(self):
        self.input_weights = np.asarray(self.input_weights, dtype=float)
        self.hidden_biases = np.asarray(self.hidden_biases, dtype=float)
        self.output_weights = np.asarray(self.output_weights, dtype=float)
        self.output_bias = float(self.output_bias)
        h, p = self.input_weights.shape
        if self.hidden_biases.shape != (h,) or self.output_weights.shape != (h,):
            raise ValueError("inconsistent hidden-layer shapes")
        for arr in (self.input_weights, self.hidden_biases, self.output_weights):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model parameters must be finite")
        if not self.features:
            self.features = [FeatureMeta(f"x{i}", i) for i in range(p)]

    @property
    def n_features(self) -> int:
        return self.input_weights.shape[1]

    def logit(self, x):
        x = np.asarray(x, dtype=float)
        _check_width(x, self.n_features)
        z = x @ self.input_weights.T + self.hidden_biases
        out = _sigmoid_arr(z) @ self.output_weights + self.output_bias
        return float(out) if x.ndim == 1 else out

    def proba(self, x):
        return sigmoid(self.logit(x))

    def to_dict(self) -> dict:
        return {
            "kind": "fcnn",
            "input_weights": self.input_weights.tolist(),
            "hidden_biases": self.hidden_biases.tolist(),
            "output_weights": self.output_weights.tolist(),
            "output_bias": self.output_bias,
            "features": [vars(m).copy() for m in self.features],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FcnnModel":
        if doc.get("kind") != "fcnn":
            raise ValueError(f"not an FCNN document (kind={doc.get('kind')!r})")
        return cls(
            np.array(doc["input_weights"], dtype=float),
            np.array(doc["hidden_biases"], dtype=float),
            np.array(doc["output_weights"], dtype=float),
            float(doc["output_bias"]),
            [FeatureMeta(**m) for m in doc["features"]],
        )


def lr_predict(model: LrModel, x):
    """sigmoid(w . x + b)."""
    return model.proba(x)


def fcnn_predict(model: FcnnModel, x):
    return model.proba(x)


def fcnn_input_grads(model: FcnnModel, x) -> np.ndarray:
    """d logit / d x for every row: rows x features."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_width(x, model.n_features)
    z = x @ model.input_weights.T + model.hidden_biases
    s = _sigmoid_arr(z)
    return (s * (1.0 - s) * model.output_weights) @ model.input_weights


def _base_rate_logit(labels) -> float:
    rate = float(np.clip(np.mean(labels), 1e-3, 1.0 - 1e-3))
    return math.log(rate / (1.0 - rate))


def _descend(params, grad_fn, data, cfg: TrainConfig, loss_fn):
    """Shared mini-batch loop: shuffle, accumulate, step, check finiteness."""
    y = _check_training_data(data)
    X = np.ascontiguousarray(data.features, dtype=float)
    n = len(y)
    rng = np.random.default_rng(cfg.seed)
    opt = _make_optimizer(cfg)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            opt.step(params, grad_fn(X[idx], y[idx]))
        if not np.isfinite(loss_fn(X, y)):
            raise TrainingError(
                f"training diverged: non-finite loss at epoch {epoch}; "
                "try a smaller learning_rate"
            )


def lr_train(data, cfg: TrainConfig) -> LrModel:
    """Fit the linear model by mini-batch descent on mean BCE."""
    p = data.features.shape[1]
    w = np.zeros(p)
    b = np.array([_base_rate_logit(data.labels)])

    def grad_fn(Xb, yb):
        r = (_sigmoid_arr(Xb @ w + b[0]) - yb) / len(yb)
        return [Xb.T @ r, np.array([r.sum()])]

    def loss_fn(X, y):
        return bce_loss(_sigmoid_arr(X @ w + b[0]), y)

    _descend([w, b], grad_fn, data, cfg, loss_fn)
    return LrModel(w, float(b[0]), list(data.meta))


def fcnn_train(data, cfg: TrainConfig) -> FcnnModel:
    """Fit the one-hidden-layer network by mini-batch descent on mean BCE."""
    p = data.features.shape[1]
    h = cfg.hidden_units
    rng = np.random.default_rng(cfg.seed)
    scale = cfg.weight_init_scale
    W1 = rng.uniform(-scale, scale, size=(h, p))
    b1 = rng.uniform(-scale, scale, size=h)
    w2 = rng.uniform(-scale, scale, size=h)
    b2 = np.array([_base_rate_logit(data.labels)])

    def grad_fn(Xb, yb):
        z = Xb @ W1.T + b1
        a = _sigmoid_arr(z)
        r = (_sigmoid_arr(a @ w2 + b2[0]) - yb) / len(yb)
        t = (a * (1.0 - a) * w2) * r[:, None]
        return [t.T @ Xb, t.sum(axis=0), a.T @ r, np.array([r.sum()])]

    def loss_fn(X, y):
        return bce_loss(_sigmoid_arr(_sigmoid_arr(X @ W1.T + b1) @ w2 + b2[0]), y)

    _descend([W1, b1, w2, b2], grad_fn, data, cfg, loss_fn)
    return FcnnModel(W1, b1, w2, float(b2[0]), list(data.meta))
