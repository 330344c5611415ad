"""Additive composition of per-feature subnets under a logistic link.

The model score is an additive logit, intercept + sum_i f_i(x_i), and the
predicted probability of default is the logistic function of that score.
Shape functions are reported without the intercept so exported curves show
each feature's own contribution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .subnet import SubNet, sigmoid, subnet_forward

__all__ = ["FeatureMeta", "NamModel", "save_model", "load_model"]


@dataclass
class FeatureMeta:
    """Name, position, evaluation domain, and raw-unit scaling of a feature.

    domain_lo/domain_hi bound the (normalized) range the model was trained
    on; penalty and certification grids are laid over this interval.
    raw_min/raw_max are the training-set statistics used by min-max scaling,
    kept so a saved model can score unnormalized inputs.
    """

    name: str
    index: int
    domain_lo: float = 0.0
    domain_hi: float = 1.0
    raw_min: float = 0.0
    raw_max: float = 1.0

    def __post_init__(self):
        if not self.domain_lo < self.domain_hi:
            raise ValueError(
                f"feature {self.name!r}: domain_lo must be < domain_hi "
                f"(got [{self.domain_lo}, {self.domain_hi}])"
            )


@dataclass
class NamModel:
    """Intercept plus one subnet per feature."""

    intercept: float
    subnets: list[SubNet]
    features: list[FeatureMeta] = field(default_factory=list)

    def __post_init__(self):
        if len(self.subnets) < 1:
            raise ValueError("model needs at least one feature subnet")
        if not self.features:
            self.features = [FeatureMeta(f"x{i}", i) for i in range(len(self.subnets))]
        if len(self.features) != len(self.subnets):
            raise ValueError(
                f"{len(self.subnets)} subnets but {len(self.features)} feature entries"
            )

    @property
    def n_features(self) -> int:
        return len(self.subnets)

    def _check_width(self, x: np.ndarray):
        width = x.shape[-1] if x.ndim else 0
        if x.ndim not in (1, 2) or width != self.n_features:
            raise ValueError(
                f"expected input with {self.n_features} features, got shape {x.shape}"
            )

    def logit(self, x):
        """Additive score intercept + sum_i f_i(x_i).

        Accepts one row of shape (p,) or a matrix of shape (n, p).
        """
        x = np.asarray(x, dtype=float)
        self._check_width(x)
        total = np.zeros(x.shape[:-1])
        for i, net in enumerate(self.subnets):
            total = total + subnet_forward(net, x[..., i])
        out = total + self.intercept
        return float(out) if x.ndim == 1 else out

    def proba(self, x):
        """Predicted probability of default: sigmoid of the additive score."""
        return sigmoid(self.logit(x))

    def shape_eval(self, feature: int, grid_size: int) -> np.ndarray:
        """Evaluate one shape function on an equispaced domain grid.

        Returns an array of shape (grid_size, 2) with columns (x, f(x)).
        The intercept is deliberately excluded.
        """
        if not 0 <= feature < self.n_features:
            raise IndexError(f"feature index {feature} out of range [0, {self.n_features})")
        if grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        meta = self.features[feature]
        xs = np.linspace(meta.domain_lo, meta.domain_hi, grid_size)
        ys = subnet_forward(self.subnets[feature], xs)
        return np.column_stack([xs, ys])

    def copy(self) -> "NamModel":
        return NamModel(
            self.intercept,
            [net.copy() for net in self.subnets],
            [FeatureMeta(**vars(m)) for m in self.features],
        )

    def to_dict(self) -> dict:
        return {
            "kind": "nam",
            "intercept": self.intercept,
            "subnets": [
                {
                    "hidden_weights": net.hidden_weights.tolist(),
                    "hidden_biases": net.hidden_biases.tolist(),
                    "output_weights": net.output_weights.tolist(),
                    "output_bias": net.output_bias,
                }
                for net in self.subnets
            ],
            "features": [vars(m).copy() for m in self.features],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NamModel":
        if doc.get("kind") != "nam":
            raise ValueError(f"not a NAM document (kind={doc.get('kind')!r})")
        subnets = [
            SubNet(
                np.array(s["hidden_weights"], dtype=float),
                np.array(s["hidden_biases"], dtype=float),
                np.array(s["output_weights"], dtype=float),
                float(s["output_bias"]),
            )
            for s in doc["subnets"]
        ]
        features = [FeatureMeta(**m) for m in doc["features"]]
        return cls(float(doc["intercept"]), subnets, features)


def save_model(model, path):
    """Write any model with a to_dict() to a JSON file.

    json round-trips Python floats through repr, so reloading reproduces
    bit-identical parameters and therefore bit-identical logits.
    """
    doc = model.to_dict()
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(path) -> NamModel:
    """Load a NAM saved by save_model."""
    doc = json.loads(Path(path).read_text())
    return NamModel.from_dict(doc)
