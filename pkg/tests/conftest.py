"""Shared helpers: random model builders, finite-difference oracles, and
synthetic classification tasks."""

import numpy as np

from mnam.data import Dataset
from mnam.model import FeatureMeta, NamModel
from mnam.subnet import SubNet, sigmoid


def rand_subnet(rng, hidden_units=2, scale=2.0) -> SubNet:
    return SubNet(
        rng.uniform(-scale, scale, hidden_units),
        rng.uniform(-scale, scale, hidden_units),
        rng.uniform(-scale, scale, hidden_units),
        float(rng.uniform(-scale, scale)),
    )


def rand_nam(rng, p=4, hidden_units=2, scale=2.0, domain=(0.0, 1.0)) -> NamModel:
    meta = [FeatureMeta(f"f{i}", i, domain[0], domain[1]) for i in range(p)]
    nets = [rand_subnet(rng, hidden_units, scale) for _ in range(p)]
    return NamModel(float(rng.uniform(-1, 1)), nets, meta)


def fd_subnet_grads(net, x, fn, h=1e-6):
    """Central finite differences of fn(net, x) with respect to each parameter.

    Returns a dict keyed like SubnetGrads fields.
    """
    out = {}
    for name in ("hidden_weights", "hidden_biases", "output_weights"):
        arr = getattr(net, name)
        g = np.zeros_like(arr)
        for k in range(len(arr)):
            up, dn = net.copy(), net.copy()
            getattr(up, name)[k] += h
            getattr(dn, name)[k] -= h
            g[k] = (fn(up, x) - fn(dn, x)) / (2 * h)
        out[name] = g
    up, dn = net.copy(), net.copy()
    up.output_bias += h
    dn.output_bias -= h
    out["output_bias"] = (fn(up, x) - fn(dn, x)) / (2 * h)
    return out


def assert_matches_fd(analytic, numeric, rtol, small=1e-3, atol=1e-9):
    """Relative tolerance for ordinary magnitudes, absolute below `small`."""
    a = np.atleast_1d(np.asarray(analytic, dtype=float))
    e = np.atleast_1d(np.asarray(numeric, dtype=float))
    big = np.abs(e) >= small
    assert np.allclose(a[big], e[big], rtol=rtol, atol=0.0), (a, e)
    assert np.allclose(a[~big], e[~big], rtol=0.0, atol=atol), (a, e)


def make_task(n, seed, wiggle_amp=1.2, trend_amp=3.0):
    """Two-feature binary task: a non-monotone conditional mean on feature 0
    (full two-period sine) plus a monotone trend on feature 1."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, 2))
    logit = wiggle_amp * np.sin(4 * np.pi * X[:, 0]) + trend_amp * (X[:, 1] - 0.5)
    y = (rng.uniform(0, 1, n) < sigmoid(logit)).astype(int)
    meta = [FeatureMeta("wiggle", 0, 0.0, 1.0), FeatureMeta("trend", 1, 0.0, 1.0)]
    return Dataset(X, y, meta)


def make_sine_task(n, seed):
    """Single-feature task with y ~ Bernoulli(sigmoid(sin(4 pi x)))."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n)
    y = (rng.uniform(0, 1, n) < sigmoid(np.sin(4 * np.pi * x))).astype(int)
    return Dataset(x[:, None], y, [FeatureMeta("wiggle", 0, 0.0, 1.0)])


def make_monotone_task(n, seed, slope=4.0):
    """Single-feature task whose conditional mean increases in x."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n)
    y = (rng.uniform(0, 1, n) < sigmoid(slope * (x - 0.5))).astype(int)
    return Dataset(x[:, None], y, [FeatureMeta("rising", 0, 0.0, 1.0)])
