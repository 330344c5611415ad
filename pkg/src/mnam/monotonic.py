"""Monotonicity constraints: grid penalties and certification.

Two constraint kinds are supported.  An individual constraint on feature a
requires the shape derivative f_a'(x) >= 0 everywhere on the feature's
domain.  A pairwise (dominance) constraint (u, v) requires
f_u'(x) - f_v'(x) >= 0 at equal feature values, so an increment to u moves
the score at least as much as the same increment to v.

Because shape functions are univariate, both conditions reduce to scans of
exact analytic derivatives over equispaced grids; no sampling or outer
optimization is needed.  The squared-hinge penalties below sum violations
over those grids, and certification checks the grid minima directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import NamModel
from .subnet import SubNet, SubnetGrads, _sigmoid_arr, subnet_input_grad

__all__ = [
    "ConstraintSet",
    "PenaltyConfig",
    "CertReport",
    "penalty_h1",
    "penalty_h2",
    "certify",
    "penalty_param_grads",
]


@dataclass
class ConstraintSet:
    """Individual monotone features plus (upper, lower) dominance pairs.

    Every pair member must itself appear in `individual`: dominance between
    two delinquency counters presumes each is individually monotone.  Pass
    allow_unanchored_pairs=True to lift that requirement.
    """

    individual: list[int] = field(default_factory=list)
    pairwise: list[tuple[int, int]] = field(default_factory=list)
    allow_unanchored_pairs: bool = False

    def __post_init__(self):
        self.individual = [int(i) for i in self.individual]
        self.pairwise = [(int(u), int(v)) for u, v in self.pairwise]
        if len(set(self.individual)) != len(self.individual):
            raise ValueError("duplicate entries in individual constraints")
        if len(set(self.pairwise)) != len(self.pairwise):
            raise ValueError("duplicate pairwise constraints")
        for u, v in self.pairwise:
            if u == v:
                raise ValueError(f"pairwise constraint ({u}, {v}) compares a feature to itself")
            if not self.allow_unanchored_pairs:
                missing = [i for i in (u, v) if i not in self.individual]
                if missing:
                    raise ValueError(
                        f"pairwise constraint ({u}, {v}): features {missing} are not "
                        "individually constrained (set allow_unanchored_pairs to permit)"
                    )

    @property
    def is_empty(self) -> bool:
        return not self.individual and not self.pairwise

    def constrained_features(self) -> list[int]:
        """All feature indices referenced by any constraint, ascending."""
        seen = set(self.individual)
        for u, v in self.pairwise:
            seen.update((u, v))
        return sorted(seen)

    def check_feature_count(self, p: int):
        for i in self.constrained_features():
            if not 0 <= i < p:
                raise IndexError(f"constraint references feature {i}, model has {p}")


@dataclass
class PenaltyConfig:
    """Grid resolution and training clamp for the penalties.

    grid_size counts equispaced points per feature domain, endpoints
    included.  epsilon is the training-time clamp floor substituted for 0
    inside the squared hinge.
    """

    grid_size: int = 1024
    epsilon: float = 1e-5

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class CertReport:
    """Grid minima per constraint and the overall verdict.

    passed is true iff every individual minimum derivative and every
    pairwise minimum derivative gap is >= 0 on the certification grid.
    """

    individual_features: list[str]
    individual_minima: list[float]
    pairwise_features: list[tuple[str, str]]
    pairwise_minima: list[float]
    grid_size: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "grid_size": self.grid_size,
            "individual": [
                {"feature": name, "min_derivative": lo}
                for name, lo in zip(self.individual_features, self.individual_minima)
            ],
            "pairwise": [
                {"upper": u, "lower": v, "min_derivative_gap": lo}
                for (u, v), lo in zip(self.pairwise_features, self.pairwise_minima)
            ],
        }


def _grid(model: NamModel, feature: int, grid_size: int) -> np.ndarray:
    meta = model.features[feature]
    return np.linspace(meta.domain_lo, meta.domain_hi, grid_size)


def _pair_grid(model: NamModel, u: int, v: int, grid_size: int) -> np.ndarray:
    """Shared grid for a dominance pair; both domains must coincide."""
    mu, mv = model.features[u], model.features[v]
    if not (np.isclose(mu.domain_lo, mv.domain_lo) and np.isclose(mu.domain_hi, mv.domain_hi)):
        raise ValueError(
            f"pair ({mu.name}, {mv.name}) domains differ: "
            f"[{mu.domain_lo}, {mu.domain_hi}] vs [{mv.domain_lo}, {mv.domain_hi}]; "
            "normalize paired features with shared min/max"
        )
    return _grid(model, u, grid_size)


def penalty_h1(model: NamModel, cs: ConstraintSet, cfg: PenaltyConfig,
               clamp_floor: float = 0.0) -> float:
    """Squared-hinge penalty on negative shape derivatives.

    Sums max(clamp_floor, -f_a'(x_j))^2 over the grid for every individual
    constraint a.  clamp_floor is 0 when measuring violations exactly and
    epsilon during training.
    """
    cs.check_feature_count(model.n_features)
    total = 0.0
    for a in cs.individual:
        d = subnet_input_grad(model.subnets[a], _grid(model, a, cfg.grid_size))
        total += float(np.sum(np.maximum(clamp_floor, -d) ** 2))
    return total


def penalty_h2(model: NamModel, cs: ConstraintSet, cfg: PenaltyConfig,
               clamp_floor: float = 0.0) -> float:
    """Squared-hinge penalty on negative pairwise derivative gaps.

    For each dominance pair (u, v) the gap f_u'(x_j) - f_v'(x_j) is taken
    with both derivatives at the same grid point, which realizes the
    equal-value comparison the constraint is defined at.
    """
    cs.check_feature_count(model.n_features)
    total = 0.0
    for u, v in cs.pairwise:
        xs = _pair_grid(model, u, v, cfg.grid_size)
        gap = subnet_input_grad(model.subnets[u], xs) - subnet_input_grad(model.subnets[v], xs)
        total += float(np.sum(np.maximum(clamp_floor, -gap) ** 2))
    return total


def certify(model: NamModel, cs: ConstraintSet, cfg: PenaltyConfig | None = None) -> CertReport:
    """Scan every constraint on a dense grid and report the minima.

    The default 1024-point grid is deliberately denser than the training
    penalty grid to guard against between-point violations.
    """
    if cfg is None:
        cfg = PenaltyConfig()
    cs.check_feature_count(model.n_features)
    ind_names, ind_minima = [], []
    for a in cs.individual:
        d = subnet_input_grad(model.subnets[a], _grid(model, a, cfg.grid_size))
        ind_names.append(model.features[a].name)
        ind_minima.append(float(np.min(d)))
    pair_names, pair_minima = [], []
    for u, v in cs.pairwise:
        xs = _pair_grid(model, u, v, cfg.grid_size)
        gap = subnet_input_grad(model.subnets[u], xs) - subnet_input_grad(model.subnets[v], xs)
        pair_names.append((model.features[u].name, model.features[v].name))
        pair_minima.append(float(np.min(gap)))
    passed = all(m >= 0.0 for m in ind_minima) and all(m >= 0.0 for m in pair_minima)
    return CertReport(ind_names, ind_minima, pair_names, pair_minima, cfg.grid_size, passed)


def _weighted_mixed_sums(net: SubNet, xs: np.ndarray, w: np.ndarray) -> SubnetGrads:
    """sum_j w_j * d(f'(x_j))/dtheta, fused over the grid.

    Equivalent to accumulating subnet_mixed_grads point by point but without
    materializing per-point gradient records.
    """
    z = np.multiply.outer(xs, net.hidden_weights) + net.hidden_biases
    s = _sigmoid_arr(z)
    sp = s * (1.0 - s)
    spp = sp * (1.0 - 2.0 * s)  # sigma'' = sigma'(1 - 2 sigma)
    w1, w2 = net.hidden_weights, net.output_weights
    sp_w = sp.T @ w
    spp_w = spp.T @ w
    sppx_w = (spp * xs[:, None]).T @ w
    return SubnetGrads(
        hidden_weights=w2 * (sp_w + w1 * sppx_w),
        hidden_biases=w2 * w1 * spp_w,
        output_weights=w1 * sp_w,
        output_bias=0.0,
    )


def _zero_grads(net: SubNet) -> SubnetGrads:
    h = net.hidden_units
    return SubnetGrads(np.zeros(h), np.zeros(h), np.zeros(h), 0.0)


def _accumulate(into: SubnetGrads, extra: SubnetGrads):
    into.hidden_weights += extra.hidden_weights
    into.hidden_biases += extra.hidden_biases
    into.output_weights += extra.output_weights


def penalty_param_grads(model: NamModel, cs: ConstraintSet, cfg: PenaltyConfig,
                        lam: float, eta: float) -> list[SubnetGrads]:
    """Exact gradient of lam*h1 + eta*h2 (epsilon-clamped) per subnet.

    Returns one gradient record per feature, in model order; features
    untouched by any constraint get zeros.  A grid term only contributes
    where its hinge is active (violation beyond the clamp floor), in which
    case d max(eps, -g)^2 / dtheta = -2 * max(eps, -g) * dg/dtheta.
    """
    if lam < 0 or eta < 0:
        raise ValueError("multipliers must be non-negative")
    cs.check_feature_count(model.n_features)
    grads = [_zero_grads(net) for net in model.subnets]
    if lam > 0:
        for a in cs.individual:
            xs = _grid(model, a, cfg.grid_size)
            d = subnet_input_grad(model.subnets[a], xs)
            active = -d > cfg.epsilon
            if not np.any(active):
                continue
            w = np.where(active, -2.0 * lam * np.maximum(cfg.epsilon, -d), 0.0)
            _accumulate(grads[a], _weighted_mixed_sums(model.subnets[a], xs, w))
    if eta > 0:
        for u, v in cs.pairwise:
            xs = _pair_grid(model, u, v, cfg.grid_size)
            gap = subnet_input_grad(model.subnets[u], xs) - subnet_input_grad(model.subnets[v], xs)
            active = -gap > cfg.epsilon
            if not np.any(active):
                continue
            m = np.where(active, 2.0 * eta * np.maximum(cfg.epsilon, -gap), 0.0)
            _accumulate(grads[u], _weighted_mixed_sums(model.subnets[u], xs, -m))
            _accumulate(grads[v], _weighted_mixed_sums(model.subnets[v], xs, m))
    return grads
