"""Penalized training of additive models and the multiplier-escalation loop.

The composite objective is

    bce(theta) + lam * h1(theta) + eta * h2(theta)

with the epsilon-clamped penalties driving gradients during descent and the
unclamped penalties deciding certification.  certified_train starts from
lam = eta = 0, retrains with an escalated multiplier whenever the exact
(clamp 0) penalty of the corresponding constraint family is still positive,
and stops once the dense-grid certificate passes.

For speed the inner loop works on parameter stacks of shape (p, H) rather
than on per-feature SubNet objects; tests cross-check the stacked kernels
against the reference closed forms in subnet.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationError, TrainingError
from .metrics import auc
from .model import NamModel
from .monotonic import CertReport, ConstraintSet, PenaltyConfig, certify, penalty_h1, penalty_h2
from .subnet import SubNet, _sigmoid_arr

__all__ = [
    "TrainConfig",
    "EscalationRound",
    "bce_loss",
    "train_nam",
    "certified_train",
]

PROB_CLIP = 1e-12


@dataclass
class TrainConfig:
    """Hyperparameters for one training run and the escalation schedule."""

    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 0.01
    seed: int = 0
    hidden_units: int = 2
    weight_init_scale: float = 1.0
    optimizer: str = "sgd"  # or "adam"
    lambda_init: float = 0.0
    eta_init: float = 0.0
    multiplier_start: float = 1.0
    multiplier_step: float = 10.0
    max_rounds: int = 7
    penalty: PenaltyConfig = field(default_factory=lambda: PenaltyConfig(grid_size=256))
    cert_grid_size: int = 1024

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.multiplier_step <= 1:
            raise ValueError("multiplier_step must exceed 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if self.epochs < 1 or self.batch_size < 1 or self.hidden_units < 1:
            raise ValueError("epochs, batch_size and hidden_units must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.multiplier_start <= 0:
            raise ValueError("multiplier_start must be positive")
        if self.weight_init_scale < 0:
            raise ValueError("weight_init_scale must be non-negative")


def bce_loss(probas, labels) -> float:
    """Mean binary cross-entropy with probabilities clipped away from {0,1}."""
    probas = np.asarray(probas, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probas.shape != labels.shape:
        raise ValueError(f"probas and labels differ in length: {probas.shape} vs {labels.shape}")
    p = np.clip(probas, PROB_CLIP, 1.0 - PROB_CLIP)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log1p(-p)))


# ---------------------------------------------------------------------------
# stacked parameters: all subnets of the model as (p, H) arrays
# ---------------------------------------------------------------------------


@dataclass
class _Stacked:
    W1: np.ndarray  # (p, H) hidden weights
    B1: np.ndarray  # (p, H) hidden biases
    W2: np.ndarray  # (p, H) output weights
    B2: np.ndarray  # (p,)   output biases
    beta: np.ndarray  # (1,)  model intercept

    def arrays(self) -> list[np.ndarray]:
        return [self.W1, self.B1, self.W2, self.B2, self.beta]

    @property
    def shape(self) -> tuple[int, int]:
        return self.W1.shape

    @classmethod
    def zeros_like(cls, other: "_Stacked") -> "_Stacked":
        return cls(*[np.zeros_like(a) for a in other.arrays()])

    @classmethod
    def from_model(cls, model: NamModel) -> "_Stacked":
        return cls(
            np.array([s.hidden_weights for s in model.subnets]),
            np.array([s.hidden_biases for s in model.subnets]),
            np.array([s.output_weights for s in model.subnets]),
            np.array([s.output_bias for s in model.subnets]),
            np.array([model.intercept]),
        )

    def to_model(self, features) -> NamModel:
        subnets = [
            SubNet(self.W1[i].copy(), self.B1[i].copy(), self.W2[i].copy(), float(self.B2[i]))
            for i in range(self.shape[0])
        ]
        return NamModel(float(self.beta[0]), subnets, list(features))

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def unflatten(cls, vec: np.ndarray, p: int, h: int) -> "_Stacked":
        k = p * h
        return cls(
            vec[0:k].reshape(p, h).copy(),
            vec[k:2 * k].reshape(p, h).copy(),
            vec[2 * k:3 * k].reshape(p, h).copy(),
            vec[3 * k:3 * k + p].copy(),
            vec[3 * k + p:].copy(),
        )


def _forward_logits(ps: _Stacked, X: np.ndarray):
    """Logits for a batch, plus hidden activations reused by the backward pass."""
    Z = X[:, :, None] * ps.W1[None] + ps.B1[None]  # (n, p, H)
    A = _sigmoid_arr(Z)
    contrib = np.einsum("nph,ph->np", A, ps.W2) + ps.B2
    return ps.beta[0] + contrib.sum(axis=1), A


def _data_grads(ps: _Stacked, X: np.ndarray, y: np.ndarray, g: _Stacked) -> None:
    """Accumulate the mean-BCE gradient for one batch into g."""
    logits, A = _forward_logits(ps, X)
    probs = _sigmoid_arr(logits)
    r = (probs - y) / len(y)  # dBCE/dlogit per row
    r_sum = r.sum()
    g.beta += r_sum
    g.B2 += r_sum
    g.W2 += np.einsum("n,nph->ph", r, A)
    T = ps.W2[None] * (A * (1.0 - A)) * r[:, None, None]
    g.W1 += np.einsum("nph,np->ph", T, X)
    g.B1 += T.sum(axis=0)


class _PenaltyKernel:
    """Gradient of lam*h1 + eta*h2 on fixed per-feature grids.

    Grids and the constraint bookkeeping are laid out once per training run;
    only the derivative scans change from step to step.
    """

    def __init__(self, cs: ConstraintSet, pcfg: PenaltyConfig, meta):
        self.cs = cs
        self.eps = pcfg.epsilon
        self.feats = cs.constrained_features()
        self.grids = {
            i: np.linspace(meta[i].domain_lo, meta[i].domain_hi, pcfg.grid_size)
            for i in self.feats
        }

    def _derivative_parts(self, ps: _Stacked, i: int):
        xs = self.grids[i]
        z = xs[:, None] * ps.W1[i] + ps.B1[i]
        s = _sigmoid_arr(z)
        sp = s * (1.0 - s)
        d = sp @ (ps.W2[i] * ps.W1[i])
        return xs, sp, s, d

    def accumulate(self, ps: _Stacked, g: _Stacked, lam: float, eta: float) -> None:
        if (lam == 0.0 and eta == 0.0) or self.cs.is_empty:
            return
        parts = {i: self._derivative_parts(ps, i) for i in self.feats}
        weights = {i: np.zeros_like(parts[i][3]) for i in self.feats}
        if lam > 0:
            for a in self.cs.individual:
                d = parts[a][3]
                active = -d > self.eps
                weights[a] -= np.where(active, 2.0 * lam * np.maximum(self.eps, -d), 0.0)
        if eta > 0:
            for u, v in self.cs.pairwise:
                gap = parts[u][3] - parts[v][3]
                m = np.where(-gap > self.eps, 2.0 * eta * np.maximum(self.eps, -gap), 0.0)
                weights[u] -= m
                weights[v] += m
        for i in self.feats:
            w = weights[i]
            if not np.any(w):
                continue
            xs, sp, s, _ = parts[i]
            spp = sp * (1.0 - 2.0 * s)
            sp_w = sp.T @ w
            spp_w = spp.T @ w
            sppx_w = (spp * xs[:, None]).T @ w
            g.W2[i] += ps.W1[i] * sp_w
            g.W1[i] += ps.W2[i] * (sp_w + ps.W1[i] * sppx_w)
            g.B1[i] += ps.W2[i] * ps.W1[i] * spp_w


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for a, g in zip(params, grads):
            a -= self.lr * g


class _Adam:
    """Adaptive moment estimation with the standard bias correction."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(a) for a in params]
            self.v = [np.zeros_like(a) for a in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for a, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            a -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return _Adam(cfg.learning_rate)
    return _Sgd(cfg.learning_rate)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _check_training_data(data) -> np.ndarray:
    if len(data.labels) == 0:
        raise TrainingError("training data is empty")
    y = np.asarray(data.labels)
    values = set(np.unique(y).tolist())
    if not values <= {0, 1}:
        raise TrainingError(f"labels must be binary 0/1, found values {sorted(values)}")
    return y.astype(float)


def _init_params(data, cfg: TrainConfig, rng: np.random.Generator) -> _Stacked:
    p = data.features.shape[1]
    h = cfg.hidden_units
    scale = cfg.weight_init_scale
    base_rate = float(np.clip(np.mean(data.labels), 1e-3, 1.0 - 1e-3))
    return _Stacked(
        rng.uniform(-scale, scale, size=(p, h)),
        rng.uniform(-scale, scale, size=(p, h)),
        rng.uniform(-scale, scale, size=(p, h)),
        np.zeros(p),
        np.array([math.log(base_rate / (1.0 - base_rate))]),
    )


def train_nam(data, cs: ConstraintSet, cfg: TrainConfig, lam: float = 0.0, eta: float = 0.0,
              init_model: NamModel | None = None, on_epoch=None) -> NamModel:
    """Mini-batch gradient descent on bce + lam*h1 + eta*h2.

    With lam = eta = 0 this is plain unconstrained NAM training.  The run is
    deterministic for a given config and data: one seeded generator drives
    initialization and every shuffle, and all reductions are numpy sums with
    fixed operand order.

    init_model warm-starts from an existing parameter set (used by the
    escalation loop); on_epoch, when given, is called as
    on_epoch(epoch_index, full_train_bce) after every epoch.
    """
    y = _check_training_data(data)
    X = np.ascontiguousarray(data.features, dtype=float)
    n = len(y)
    rng = np.random.default_rng(cfg.seed)

    if init_model is not None:
        ps = _Stacked.from_model(init_model)
        if ps.shape != (X.shape[1], cfg.hidden_units):
            raise TrainingError(
                f"warm-start model shape {ps.shape} does not match "
                f"(features, hidden_units) = ({X.shape[1]}, {cfg.hidden_units})"
            )
    else:
        ps = _init_params(data, cfg, rng)

    kernel = _PenaltyKernel(cs, cfg.penalty, data.meta)
    opt = _make_optimizer(cfg)
    use_penalty = (lam > 0 or eta > 0) and not cs.is_empty

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            g = _Stacked.zeros_like(ps)
            _data_grads(ps, X[idx], y[idx], g)
            if use_penalty:
                kernel.accumulate(ps, g, lam, eta)
            opt.step(ps.arrays(), g.arrays())
        epoch_loss = bce_loss(_sigmoid_arr(_forward_logits(ps, X)[0]), y)
        if not np.isfinite(epoch_loss):
            raise TrainingError(
                f"training diverged: non-finite loss at epoch {epoch}; "
                "try a smaller learning_rate"
            )
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)

    return ps.to_model(data.meta)


def _composite_objective_and_grad(ps: _Stacked, X: np.ndarray, y: np.ndarray,
                                  kernel: _PenaltyKernel, cs: ConstraintSet,
                                  pcfg: PenaltyConfig, meta,
                                  lam: float, eta: float):
    """Full-batch objective value and gradient at one parameter point.

    The value uses the epsilon-clamped penalties, matching what the descent
    steps differentiate; exposed for finite-difference verification.
    """
    logits, _ = _forward_logits(ps, X)
    value = bce_loss(_sigmoid_arr(logits), y)
    if not cs.is_empty and (lam > 0 or eta > 0):
        model = ps.to_model(meta)
        value += lam * penalty_h1(model, cs, pcfg, pcfg.epsilon)
        value += eta * penalty_h2(model, cs, pcfg, pcfg.epsilon)
    g = _Stacked.zeros_like(ps)
    _data_grads(ps, X, y, g)
    kernel.accumulate(ps, g, lam, eta)
    return value, g


# ---------------------------------------------------------------------------
# certified escalation loop
# ---------------------------------------------------------------------------


@dataclass
class EscalationRound:
    """One row of the escalation trace."""

    round: int
    lam: float
    eta: float
    h1: float
    h2: float
    train_loss: float
    test_auc: float | None
    cert_passed: bool

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "lambda": self.lam,
            "eta": self.eta,
            "h1": self.h1,
            "h2": self.h2,
            "train_loss": self.train_loss,
            "test_auc": self.test_auc,
            "cert_passed": self.cert_passed,
        }


def _escalate(current: float, cfg: TrainConfig) -> float:
    return cfg.multiplier_start if current == 0.0 else current * cfg.multiplier_step


def certified_train(data, cs: ConstraintSet, cfg: TrainConfig, eval_data=None
                    ) -> tuple[NamModel, CertReport, list[EscalationRound]]:
    """Train, certify, and escalate multipliers until the certificate passes.

    Starts from lam = eta = 0.  After each round the exact (clamp 0)
    penalties are measured on the dense certification grid; a positive h1
    escalates lam, a positive h2 escalates eta, and training resumes from
    the previous parameters.  Raises CertificationError (carrying the trace
    and the last model) if max_rounds retrainings do not certify.

    Returns (model, certificate, trace); the certificate always has
    passed=True on the success path.
    """
    cert_cfg = PenaltyConfig(grid_size=cfg.cert_grid_size, epsilon=cfg.penalty.epsilon)
    lam, eta = cfg.lambda_init, cfg.eta_init
    trace: list[EscalationRound] = []
    model = train_nam(data, cs, cfg, lam, eta)

    for round_idx in range(cfg.max_rounds + 1):
        report = certify(model, cs, cert_cfg)
        h1 = penalty_h1(model, cs, cert_cfg, 0.0)
        h2 = penalty_h2(model, cs, cert_cfg, 0.0)
        train_loss = bce_loss(model.proba(data.features), data.labels)
        test_auc = None
        if eval_data is not None:
            test_auc = auc(model.proba(eval_data.features), eval_data.labels)
        trace.append(EscalationRound(round_idx, lam, eta, h1, h2,
                                     train_loss, test_auc, report.passed))
        # multipliers never decrease across rounds, by construction
        assert all(a.lam <= b.lam and a.eta <= b.eta for a, b in zip(trace, trace[1:]))
        if report.passed:
            return model, report, trace
        if round_idx == cfg.max_rounds:
            break
        if h1 > 0:
            lam = _escalate(lam, cfg)
        if h2 > 0:
            eta = _escalate(eta, cfg)
        model = train_nam(data, cs, cfg, lam, eta, init_model=model)

    raise CertificationError(
        f"no certificate after {cfg.max_rounds} escalation rounds "
        f"(final lambda={lam:g}, eta={eta:g}, h1={trace[-1].h1:g}, h2={trace[-1].h2:g})",
        model=model,
        report=certify(model, cs, cert_cfg),
        trace=trace,
    )
