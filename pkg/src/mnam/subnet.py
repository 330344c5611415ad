"""Closed-form math for one univariate shape-function subnet.

A subnet maps a scalar feature value to a scalar contribution:

    f(x) = sum_k w2[k] * sigmoid(w1[k] * x + b1[k]) + b2

Everything downstream (penalties, certification, importance) needs exact
derivatives of f with respect to x and the parameters, so all of them are
implemented analytically here.  The architecture is a single hidden layer
with a logistic activation; no autodiff is involved.

All functions accept either a scalar x or a 1-d array of x values and
return results of matching shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SubNet",
    "SubnetGrads",
    "sigmoid",
    "sigmoid_prime",
    "sigmoid_second",
    "subnet_forward",
    "subnet_input_grad",
    "subnet_param_grads",
    "subnet_mixed_grads",
]


def _sigmoid_arr(z: np.ndarray) -> np.ndarray:
    # Two-branch form: exp() only ever sees non-positive arguments, so this
    # cannot overflow no matter how large |z| gets.
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(z):
    """Numerically stable logistic function 1 / (1 + exp(-z))."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        return float(_sigmoid_arr(z.reshape(1))[0])
    return _sigmoid_arr(z)


def sigmoid_prime(z):
    """First derivative of the logistic function: s * (1 - s)."""
    s = sigmoid(z)
    return s * (1.0 - s)


def sigmoid_second(z):
    """Second derivative of the logistic function.

    Uses the identity sigma''(z) = sigma'(z) * (1 - 2 * sigma(z)), which
    follows from differentiating sigma' = sigma * (1 - sigma).
    """
    s = sigmoid(z)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


@dataclass
class SubNet:
    """Parameters of one univariate one-hidden-layer network.

    hidden_weights, hidden_biases and output_weights all have length H
    (the hidden-unit count); output_bias is a scalar.
    """

    hidden_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray
    output_bias: float

    def __post_init__(self):
        self.hidden_weights = np.asarray(self.hidden_weights, dtype=float)
        self.hidden_biases = np.asarray(self.hidden_biases, dtype=float)
        self.output_weights = np.asarray(self.output_weights, dtype=float)
        self.output_bias = float(self.output_bias)
        h = self.hidden_weights.shape
        if h != self.hidden_biases.shape or h != self.output_weights.shape:
            raise ValueError("subnet parameter arrays must share one length")
        if self.hidden_weights.ndim != 1 or self.hidden_units < 1:
            raise ValueError("subnet needs at least one hidden unit")
        for arr in (self.hidden_weights, self.hidden_biases, self.output_weights):
            if not np.all(np.isfinite(arr)):
                raise ValueError("subnet parameters must be finite")
        if not np.isfinite(self.output_bias):
            raise ValueError("subnet parameters must be finite")

    @property
    def hidden_units(self) -> int:
        return self.hidden_weights.shape[0]

    @classmethod
    def zeros(cls, hidden_units: int = 2) -> "SubNet":
        z = np.zeros(hidden_units)
        return cls(z.copy(), z.copy(), z.copy(), 0.0)

    def copy(self) -> "SubNet":
        return SubNet(
            self.hidden_weights.copy(),
            self.hidden_biases.copy(),
            self.output_weights.copy(),
            self.output_bias,
        )


@dataclass
class SubnetGrads:
    """Partial derivatives with respect to every subnet parameter.

    Field shapes mirror SubNet for scalar x; for an array of m inputs the
    hidden/output weight fields gain a leading m axis and output_bias has
    shape (m,).
    """

    hidden_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray
    output_bias: float | np.ndarray


def _preactivations(net: SubNet, x: np.ndarray) -> np.ndarray:
    # shape (..., H): one column per hidden unit
    return np.multiply.outer(x, net.hidden_weights) + net.hidden_biases


def subnet_forward(net: SubNet, x):
    """Evaluate f(x) = sum_k w2[k] * sigma(w1[k] x + b1[k]) + b2."""
    x = np.asarray(x, dtype=float)
    z = _preactivations(net, x)
    out = _sigmoid_arr(z) @ net.output_weights + net.output_bias
    return float(out) if x.ndim == 0 else out


def subnet_input_grad(net: SubNet, x):
    """Exact df/dx = sum_k w2[k] * w1[k] * sigma'(w1[k] x + b1[k])."""
    x = np.asarray(x, dtype=float)
    z = _preactivations(net, x)
    s = _sigmoid_arr(z)
    out = (s * (1.0 - s)) @ (net.output_weights * net.hidden_weights)
    return float(out) if x.ndim == 0 else out


def subnet_param_grads(net: SubNet, x) -> SubnetGrads:
    """Exact partials of subnet_forward with respect to each parameter."""
    x = np.asarray(x, dtype=float)
    z = _preactivations(net, x)
    s = _sigmoid_arr(z)
    sp = s * (1.0 - s)
    d_w1 = net.output_weights * sp * x[..., None]
    d_b1 = net.output_weights * sp
    d_b2 = 1.0 if x.ndim == 0 else np.ones_like(x)
    return SubnetGrads(d_w1, d_b1, s, d_b2)


def subnet_mixed_grads(net: SubNet, x) -> SubnetGrads:
    """Exact partials of subnet_input_grad with respect to each parameter.

    These are the mixed second derivatives d(df/dx)/dtheta that the
    monotonicity penalties chain through.
    """
    x = np.asarray(x, dtype=float)
    z = _preactivations(net, x)
    s = _sigmoid_arr(z)
    sp = s * (1.0 - s)
    spp = sp * (1.0 - 2.0 * s)  # sigma'' via the identity sigma'(1 - 2 sigma)
    w1 = net.hidden_weights
    w2 = net.output_weights
    # d/dw1 of w1 * sigma'(w1 x + b1) needs the product rule.
    d_w1 = w2 * (sp + w1 * spp * x[..., None])
    d_b1 = w2 * w1 * spp
    d_w2 = w1 * sp
    d_b2 = 0.0 if x.ndim == 0 else np.zeros_like(x)
    return SubnetGrads(d_w1, d_b1, d_w2, d_b2)
