"""Training of the positive, negative (random-label NL) and auxiliary classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import UNKNOWN, OpenSetDataset, PoolState
from .errors import ConfigurationError, NumericalError, PoolError
from .nn import (Network, OptimizerConfig, ce_loss_grad, forward, init_network, nl_loss_grad,
                 replace_head, sgd_step)

UNLABELED = -1


@dataclass(frozen=True)
class TrainSchedule:
    """Epoch budgets before scaling; effective epochs are ``round(base * epoch_scale)``.

    ``snapshot_interval`` of 0 means ``epochs_negative // snapshot_count``.
    """

    epochs_positive: int = 100
    epochs_negative: int = 100
    epochs_aux: int = 100
    epoch_scale: float = 0.3
    snapshot_count: int = 5
    snapshot_interval: int = 0
    subset_size: int = 200
    hidden: tuple = (64, 64)

    def __post_init__(self):
        for name in ("epochs_positive", "epochs_negative", "epochs_aux", "snapshot_count"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1", key=name)
        if self.epoch_scale <= 0:
            raise ConfigurationError("epoch_scale must be > 0", key="epoch_scale")
        if self.snapshot_interval < 0 or self.subset_size < 0:
            raise ConfigurationError("snapshot_interval and subset_size must be >= 0")
        if self.interval < 1 or self.negative_epochs < self.snapshot_count * self.interval:
            raise ConfigurationError(
                f"{self.snapshot_count} snapshots every {self.interval} epochs do not fit in "
                f"{self.negative_epochs} negative epochs", key="snapshot_interval")

    def _scaled(self, n):
        return max(1, int(round(n * self.epoch_scale)))

    @property
    def positive_epochs(self) -> int:
        return self._scaled(self.epochs_positive)

    @property
    def negative_epochs(self) -> int:
        return self._scaled(self.epochs_negative)

    @property
    def aux_epochs(self) -> int:
        return self._scaled(self.epochs_aux)

    @property
    def interval(self) -> int:
        return self.snapshot_interval or self.negative_epochs // self.snapshot_count


@dataclass
class PredictionSnapshot:
    """Per-candidate predictions used for scoring; rows follow ``indices``."""

    indices: np.ndarray
    positive: np.ndarray
    negative: np.ndarray | None
    aux_unknown: np.ndarray


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _fit(net, X, targets_fn, loss_fn, epochs, opt, rng, frozen_layers=0, on_epoch=None):
    velocity = net.zeros_like()
    for epoch in range(1, epochs + 1):
        for batch in _minibatches(len(X), opt.batch_size, rng):
            loss, grads = loss_fn(net, X[batch], targets_fn(batch))
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}")
            net, velocity = sgd_step(net, grads, opt, velocity, frozen_layers=frozen_layers)
        if on_epoch is not None:
            on_epoch(epoch, net)
    return net


def train_positive(pool: PoolState, dataset: OpenSetDataset, schedule: TrainSchedule, opt: OptimizerConfig,
                   rng: np.random.Generator, init: Network | None = None) -> Network:
    """K-way cross-entropy classifier on the labeled known pool only."""
    idx = pool.labeled_known
    if len(idx) == 0:
        raise PoolError("labeled_known is empty")
    K = dataset.n_known
    net = init.copy() if init is not None else init_network([dataset.dim, *schedule.hidden, K], rng)
    X, Y = dataset.X[idx], np.eye(K)[dataset.y[idx]]
    return _fit(net, X, lambda b: Y[b], ce_loss_grad, schedule.positive_epochs, opt, rng)


def draw_complementary(labels: np.ndarray, n_known: int, rng: np.random.Generator) -> np.ndarray:
    """One complementary class per row.

    Rows with a label get a uniform draw from the other ``K-1`` classes; rows
    marked ``UNLABELED`` get a uniform draw from all ``K``.
    """
    labels = np.asarray(labels)
    has = labels != UNLABELED
    k = rng.integers(0, np.where(has, n_known - 1, n_known))
    k = k + (has & (k >= labels))
    assert not np.any(has & (k == labels))
    return k


def assign_random_complementary(example_index: int, pool: PoolState, dataset: OpenSetDataset,
                                rng: np.random.Generator) -> np.ndarray:
    if example_index in pool.labeled_unknown:
        raise PoolError(f"example {example_index} is labeled unknown and takes no part in negative learning")
    if example_index in pool.labeled_known:
        label = dataset.y[example_index]
    elif example_index in pool.unlabeled:
        label = UNLABELED
    else:
        raise PoolError(f"example {example_index} is not in any pool")
    k = draw_complementary(np.array([label]), dataset.n_known, rng)[0]
    return np.eye(dataset.n_known)[k]


def train_negative(f_p: Network, pool: PoolState, subset, dataset: OpenSetDataset, schedule: TrainSchedule,
                   opt: OptimizerConfig, rng: np.random.Generator, freeze_backbone: bool = False):
    """Fine-tune a copy of ``f_p`` with a fresh head on random complementary labels.

    Batches mix the labeled known pool (complementary labels avoid the true
    class) with ``subset`` (labels drawn over all classes). Labels are redrawn
    every time a row appears in a batch. The softmax over the whole unlabeled
    pool is recorded after epochs ``m, 2m, ..., t*m`` with ``m = schedule.interval``
    and ``t = schedule.snapshot_count``.

    Returns ``(f_n, snapshots)`` with ``len(snapshots) == schedule.snapshot_count``.
    """
    K = dataset.n_known
    net = replace_head(f_p, K, rng)
    rows = np.concatenate([pool.labeled_known, np.asarray(subset, dtype=np.int64)])
    marks = np.concatenate([dataset.y[pool.labeled_known], np.full(len(subset), UNLABELED)])
    X = dataset.X[rows]
    eye = np.eye(K)
    X_u = dataset.X[pool.unlabeled]
    snapshots = []
    due = {i * schedule.interval for i in range(1, schedule.snapshot_count + 1)}

    def record(epoch, current):
        if epoch in due:
            snapshots.append(forward(current, X_u) if len(X_u) else np.zeros((0, K)))

    net = _fit(net, X, lambda b: eye[draw_complementary(marks[b], K, rng)], nl_loss_grad,
               schedule.negative_epochs, opt, rng,
               frozen_layers=net.n_layers - 1 if freeze_backbone else 0, on_epoch=record)
    return net, snapshots


def train_aux(pool: PoolState, dataset: OpenSetDataset, schedule: TrainSchedule, opt: OptimizerConfig,
              rng: np.random.Generator) -> Network | None:
    """(K+1)-way classifier where labeled unknowns form class K.

    Returns ``None`` when no unknown has been labeled yet; callers treat that
    as an unknown-class probability of zero everywhere.
    """
    if len(pool.labeled_known) == 0:
        raise PoolError("labeled_known is empty")
    if len(pool.labeled_unknown) == 0:
        return None
    K = dataset.n_known
    idx = np.concatenate([pool.labeled_known, pool.labeled_unknown])
    labels = np.where(dataset.y[idx] == UNKNOWN, K, dataset.y[idx])
    Y = np.eye(K + 1)[labels]
    net = init_network([dataset.dim, *schedule.hidden, K + 1], rng)
    return _fit(net, dataset.X[idx], lambda b: Y[b], ce_loss_grad, schedule.aux_epochs, opt, rng)


def aux_unknown_prob(f_aux: Network | None, X: np.ndarray) -> np.ndarray:
    if f_aux is None:
        return np.zeros(len(X))
    return forward(f_aux, X)[:, -1] if len(X) else np.zeros(0)


def build_snapshot(f_p: Network, f_aux: Network | None, negative_snapshots, pool: PoolState,
                   dataset: OpenSetDataset) -> PredictionSnapshot:
    """Assemble ``p+``, the mean of the negative snapshots, and ``p_aux`` over the unlabeled pool.

    ``negative_snapshots`` may be ``None`` for strategies that never look at
    the negative head.
    """
    idx = pool.unlabeled
    X_u = dataset.X[idx]
    negative = None
    if negative_snapshots is not None:
        if len(negative_snapshots) == 0:
            raise PoolError("no negative snapshots recorded")
        for s in negative_snapshots:
            if s.shape != (len(idx), dataset.n_known):
                raise PoolError(f"snapshot shape {s.shape} does not match {len(idx)} unlabeled rows")
        negative = np.mean(np.stack(negative_snapshots), axis=0)
    positive = forward(f_p, X_u) if len(idx) else np.zeros((0, dataset.n_known))
    return PredictionSnapshot(idx, positive, negative, aux_unknown_prob(f_aux, X_u))
