"""Central finite-difference verification of the analytic loss gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Network, ce_loss_grad, forward, init_network, nl_loss_grad


def reference_loss(net: Network, x: np.ndarray, targets: np.ndarray, kind: str, weight_decay: float = 0.0) -> float:
    """Loss evaluated straight from the probabilities, without any gradient code."""
    p = forward(net, x)
    if kind == "ce":
        per = -np.log(np.maximum(np.sum(p * targets, axis=1), 1e-7))
    else:
        per = -np.log(np.maximum(1.0 - np.sum(p * targets, axis=1), 1e-7))
    decay = 0.5 * weight_decay * sum(float(np.sum(q * q)) for q in net.params())
    return float(per.mean()) + decay


def numeric_gradient(net: Network, x, targets, kind: str, weight_decay: float = 0.0, step: float = 1e-5) -> Network:
    grads = net.zeros_like()
    probe = net.copy()
    for p, g in zip(probe.params(), grads.params()):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = reference_loss(probe, x, targets, kind, weight_decay)
            flat[j] = orig - step
            down = reference_loss(probe, x, targets, kind, weight_decay)
            flat[j] = orig
            gflat[j] = (up - down) / (2 * step)
    return grads


def max_relative_error(analytic: Network, numeric: Network, floor: float = 1e-6) -> float:
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over all parameters."""
    worst = 0.0
    for a, n in zip(analytic.params(), numeric.params()):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def _min_preactivation(net: Network, x: np.ndarray) -> float:
    a, smallest = x, np.inf
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w.T + b
        smallest = min(smallest, float(np.min(np.abs(z))))
        a = np.maximum(z, 0)
    return smallest


def random_case(rng: np.random.Generator, kind: str, margin: float = 1e-3):
    """A small random network and batch with no rectifier input near its kink.

    Finite differences straddling a kink measure a one-sided slope, so such
    draws are rejected.
    """
    while True:
        d = int(rng.integers(2, 5))
        sizes = [d] + [int(h) for h in rng.integers(3, 8, size=int(rng.integers(1, 3)))] + [int(rng.integers(2, 6))]
        net = init_network(sizes, rng)
        for b in net.biases:
            b[:] = rng.normal(scale=0.1, size=b.shape)
        n = int(rng.integers(1, 7))
        x = rng.normal(size=(n, d))
        if _min_preactivation(net, x) < margin:
            continue
        labels = rng.integers(0, sizes[-1], size=n)
        return net, x, np.eye(sizes[-1])[labels]


@dataclass
class GradcheckReport:
    n_cases: int
    max_error_ce: float
    max_error_nl: float

    @property
    def max_error(self) -> float:
        return max(self.max_error_ce, self.max_error_nl)


def run_gradcheck(n_cases: int = 20, seed: int = 0, weight_decay: float = 1e-4, step: float = 1e-5) -> GradcheckReport:
    rng = np.random.default_rng(seed)
    worst = {"ce": 0.0, "nl": 0.0}
    for _ in range(n_cases):
        for kind, fn in (("ce", ce_loss_grad), ("nl", nl_loss_grad)):
            net, x, t = random_case(rng, kind)
            _, analytic = fn(net, x, t, weight_decay=weight_decay)
            numeric = numeric_gradient(net, x, t, kind, weight_decay, step)
            worst[kind] = max(worst[kind], max_relative_error(analytic, numeric))
    return GradcheckReport(n_cases, worst["ce"], worst["nl"])
