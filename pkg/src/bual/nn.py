"""Dense rectifier networks with hand-written backpropagation.

Everything here is a pure function of its inputs: losses return fresh gradient
containers and :func:`sgd_step` returns new parameter and velocity objects
instead of mutating the ones passed in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError

LOG_EPS = 1e-7


@dataclass
class Network:
    """Layer list of ``(W, b)`` with ``W`` shaped ``[fan_out, fan_in]``.

    All layers but the last are followed by a rectifier; the last layer emits
    logits. The same container holds gradients and momentum buffers.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = field(default="relu")

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigurationError("network needs matching, non-empty weight and bias lists")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ConfigurationError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ConfigurationError(
                    f"layer {i}: fan_in {w.shape[1]} != previous fan_out {self.weights[i - 1].shape[0]}"
                )

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> Network:
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation)

    def zeros_like(self) -> Network:
        return Network([np.zeros_like(w) for w in self.weights],
                       [np.zeros_like(b) for b in self.biases], self.activation)

    def params(self):
        """Yield every parameter array, weights and biases interleaved by layer."""
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())

    def equals(self, other: Network) -> bool:
        """Bitwise equality of every parameter."""
        if self.n_layers != other.n_layers:
            return False
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.params(), other.params()))

    def logits(self, x: np.ndarray) -> np.ndarray:
        return _forward(self, _as_batch(self, x))[0]

    def hidden(self, x: np.ndarray) -> np.ndarray:
        """Activations feeding the output layer (the input itself for a linear net)."""
        acts = _forward(self, _as_batch(self, x))[1]
        return acts[-1]


def glorot_layer(fan_in: int, fan_out: int, rng: np.random.Generator):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in)), np.zeros(fan_out)


def init_network(layer_sizes, rng: np.random.Generator) -> Network:
    """Glorot-uniform network for sizes ``[d, h1, ..., C]``."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ConfigurationError(f"invalid layer sizes {sizes}")
    layers = [glorot_layer(i, o, rng) for i, o in zip(sizes[:-1], sizes[1:])]
    return Network([w for w, _ in layers], [b for _, b in layers])


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_inputs:
        raise ConfigurationError(f"feature dimension {x.shape[-1]} does not match network input {net.n_inputs}")
    return x


def _forward(net: Network, x: np.ndarray):
    """Return logits plus the list of layer inputs (needed for backprop)."""
    acts = [x]
    a = x
    last = net.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        if i == last:
            return z, acts
        a = np.maximum(z, 0.0)
        acts.append(a)


def forward(net: Network, features) -> np.ndarray:
    """Class probabilities; a single vector in gives a single vector out."""
    single = np.ndim(features) == 1
    probs = softmax(net.logits(features))
    return probs[0] if single else probs


def _backward(net: Network, acts, dz: np.ndarray) -> Network:
    grads = net.zeros_like()
    for i in range(net.n_layers - 1, -1, -1):
        a = acts[i]
        grads.weights[i] = dz.T @ a
        grads.biases[i] = dz.sum(axis=0)
        if i:
            dz = (dz @ net.weights[i]) * (a > 0)
    return grads


def _add_decay(net: Network, loss: float, grads: Network, weight_decay: float):
    if weight_decay:
        loss += 0.5 * weight_decay * sum(float(np.sum(p * p)) for p in net.params())
        for g, p in zip(grads.params(), net.params()):
            g += weight_decay * p
    return loss, grads


def _check_batch(net: Network, x, targets):
    x = _as_batch(net, x)
    targets = np.asarray(targets, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if targets.shape != (x.shape[0], net.n_outputs):
        raise ConfigurationError(f"targets shape {targets.shape} != ({x.shape[0]}, {net.n_outputs})")
    if not np.all(targets.sum(axis=1) == 1) or not np.all((targets == 0) | (targets == 1)):
        raise ConfigurationError("targets must be one-hot rows")
    return x, targets


def ce_loss_grad(net: Network, features, onehot, weight_decay: float = 0.0):
    """Mean cross-entropy over the batch and its gradient.

    ``-log p_y`` is clamped at ``-log(1e-7)``; clamped examples contribute zero
    gradient. With ``weight_decay`` the loss gains ``0.5 * wd * ||theta||^2``.
    """
    x, y = _check_batch(net, features, onehot)
    n = x.shape[0]
    logits, acts = _forward(net, x)
    p = softmax(logits)
    p_true = np.sum(p * y, axis=1)
    live = p_true > LOG_EPS
    loss = -np.sum(np.log(np.maximum(p_true, LOG_EPS))) / n
    dz = (p - y) * live[:, None] / n
    return _add_decay(net, float(loss), _backward(net, acts, dz), weight_decay)


def nl_loss_grad(net: Network, features, comp_onehot, weight_decay: float = 0.0):
    """Mean negative-learning loss ``-sum_k ybar_k log(1 - p_k)`` and its gradient.

    ``1 - p_k`` is computed as the mass of the other classes (no cancellation)
    and clamped below at 1e-7.
    """
    x, ybar = _check_batch(net, features, comp_onehot)
    n = x.shape[0]
    logits, acts = _forward(net, x)
    p = softmax(logits)
    p_comp = np.sum(p * ybar, axis=1)
    rest = np.sum(p * (1.0 - ybar), axis=1)
    live = rest > LOG_EPS
    loss = -np.sum(np.log(np.maximum(rest, LOG_EPS))) / n
    # dL/dz_j = p_k (delta_kj - p_j) / (1 - p_k)
    scale = np.where(live, p_comp / np.maximum(rest, LOG_EPS), 0.0)
    dz = scale[:, None] * (ybar - p) / n
    return _add_decay(net, float(loss), _backward(net, acts, dz), weight_decay)


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 32

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0", key="learning_rate")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError("momentum must be in [0, 1)", key="momentum")
        if not self.weight_decay >= 0:
            raise ConfigurationError("weight_decay must be >= 0", key="weight_decay")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigurationError("batch_size must be a positive integer", key="batch_size")


def sgd_step(net: Network, grads: Network, opt: OptimizerConfig, velocity: Network | None = None,
             frozen_layers: int = 0):
    """One heavy-ball step: ``v = mu v + (g + wd theta)``, ``theta -= lr v``.

    The first ``frozen_layers`` layers are returned unchanged (velocity too).
    """
    if velocity is None:
        velocity = net.zeros_like()
    for src in (grads, velocity):
        if src.n_layers != net.n_layers or any(
                a.shape != b.shape for a, b in zip(src.params(), net.params())):
            raise ConfigurationError("gradient/velocity shapes do not match the network")
    if not grads.is_finite():
        raise NumericalError("non-finite gradient entries")
    new_net, new_vel = net.copy(), velocity.copy()
    for i in range(frozen_layers, net.n_layers):
        for plist, glist, vlist in ((new_net.weights, grads.weights, new_vel.weights),
                                    (new_net.biases, grads.biases, new_vel.biases)):
            g = glist[i] + opt.weight_decay * plist[i] if opt.weight_decay else glist[i]
            vlist[i] = opt.momentum * vlist[i] + g
            plist[i] = plist[i] - opt.learning_rate * vlist[i]
    return new_net, new_vel


def replace_head(net: Network, n_outputs: int, rng: np.random.Generator) -> Network:
    """Copy of ``net`` with a freshly initialised output layer of width ``n_outputs``."""
    out = net.copy()
    fan_in = net.weights[-1].shape[1]
    out.weights[-1], out.biases[-1] = glorot_layer(fan_in, int(n_outputs), rng)
    return out
