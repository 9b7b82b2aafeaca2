"""Open-set datasets and the labeled-known / labeled-unknown / unlabeled pools."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, IngestionError, PoolError

UNKNOWN = -1


@dataclass
class OpenSetDataset:
    """Training pool plus a known-class-only test split.

    Labels are ``0..n_known-1`` for known classes and ``UNKNOWN`` (-1) for
    everything else. ``source_train`` keeps the original class id of every
    training row.
    """

    X: np.ndarray
    y: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    n_known: int
    openness: float
    source_train: np.ndarray | None = None
    class_names: list = field(default_factory=list)
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None

    def __post_init__(self):
        if self.n_known < 2:
            raise ConfigurationError("need at least 2 known classes", key="n_known")
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.X_test)):
            raise ConfigurationError("features must be finite")
        valid = (self.y == UNKNOWN) | ((self.y >= 0) & (self.y < self.n_known))
        if not np.all(valid):
            raise ConfigurationError("training labels out of range")
        if np.any(self.y_test == UNKNOWN) or np.any((self.y_test < 0) | (self.y_test >= self.n_known)):
            raise ConfigurationError("test split may only hold known classes")

    @property
    def n_train(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def is_known(self) -> np.ndarray:
        return self.y != UNKNOWN


@dataclass(frozen=True)
class ClusterSpec:
    """Gaussian class-conditional generator. One entry per source class."""

    means: np.ndarray
    covariances: np.ndarray
    n_train: np.ndarray
    n_test: np.ndarray
    known: tuple

    @property
    def n_classes(self) -> int:
        return len(self.means)


def ring_spec(n_known: int = 8, openness: float = 0.5, dim: int = 2, radius: float = 4.0,
              unknown_radius: float | None = 16.0, cluster_std: float = 1.0, n_train: int = 200,
              n_test: int = 100) -> ClusterSpec:
    """``n_known`` isotropic clusters evenly spaced on a circle, plus enough
    unknown clusters to reach ``openness``.

    The unknown count is ``openness * n_known / (1 - openness)`` and must come
    out whole. Unknown clusters are spread evenly on a circle of
    ``unknown_radius``, starting halfway between the first two known clusters;
    ``None`` puts them on the known circle.
    Classes ``0..n_known-1`` are known; the rest are unknown.
    """
    if dim < 2:
        raise ConfigurationError("dim must be >= 2", key="dim")
    if n_known < 2:
        raise ConfigurationError("need at least 2 known classes", key="n_known")
    if not 0.0 <= openness < 1.0:
        raise ConfigurationError("openness must be in [0, 1)", key="openness")
    exact = openness * n_known / (1.0 - openness)
    n_unknown = int(round(exact))
    if not np.isclose(n_unknown, exact):
        raise ConfigurationError(
            f"openness {openness} with {n_known} known classes needs {exact:.3g} unknown classes", key="openness")
    n_classes = n_known + n_unknown
    angles = np.concatenate([2 * np.pi * np.arange(n_known) / n_known,
                             np.pi / n_known + 2 * np.pi * np.arange(n_unknown) / max(n_unknown, 1)])
    rad = np.full(n_classes, radius)
    if unknown_radius is not None:
        rad[n_known:] = unknown_radius
    means = np.zeros((n_classes, dim))
    means[:, 0] = rad * np.cos(angles)
    means[:, 1] = rad * np.sin(angles)
    covs = np.repeat(np.eye(dim)[None] * cluster_std ** 2, n_classes, axis=0)
    n_te = np.array([n_test] * n_known + [0] * n_unknown)
    return ClusterSpec(means, covs, np.full(n_classes, n_train), n_te, tuple(range(n_known)))


def make_synthetic(spec: ClusterSpec, rng: np.random.Generator) -> OpenSetDataset:
    known = list(spec.known)
    if len(known) < 2:
        raise ConfigurationError("need at least 2 known classes", key="known")
    label_of = {c: i for i, c in enumerate(known)}
    X_tr, src_tr, X_te, y_te = [], [], [], []
    for c in range(spec.n_classes):
        n_tr = int(spec.n_train[c])
        n_te = int(spec.n_test[c]) if c in label_of else 0
        pts = rng.multivariate_normal(spec.means[c], spec.covariances[c], size=n_tr + n_te)
        X_tr.append(pts[:n_tr])
        src_tr.append(np.full(n_tr, c))
        if n_te:
            X_te.append(pts[n_tr:])
            y_te.append(np.full(n_te, label_of[c]))
    X, src = np.concatenate(X_tr), np.concatenate(src_tr)
    order = rng.permutation(len(src))
    X, src = X[order], src[order]
    y = np.array([label_of.get(int(s), UNKNOWN) for s in src])
    return OpenSetDataset(
        X=X, y=y, X_test=np.concatenate(X_te), y_test=np.concatenate(y_te),
        n_known=len(known), openness=(spec.n_classes - len(known)) / spec.n_classes,
        source_train=src, class_names=[str(c) for c in known],
    )


def fit_standardizer(X: np.ndarray):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def load_csv(path, label_column: str, known_classes, test_fraction: float = 0.2,
             rng: np.random.Generator | None = None) -> OpenSetDataset:
    """Read a comma-separated file with a header row.

    Every column except ``label_column`` must be numeric. Labels not listed in
    ``known_classes`` become ``UNKNOWN``. A stratified ``test_fraction`` of each
    known class is held out for testing; unknown rows all stay in training.
    Features are standardized with training-row statistics only.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    known = [str(k) for k in known_classes]
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path} is empty", row=1) from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise IngestionError(f"label column '{label_column}' not in header {header}", row=1)
        li = header.index(label_column)
        feats, labels = [], []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"expected {len(header)} fields, got {len(row)}", row=rownum)
            vals = []
            for j, cell in enumerate(row):
                if j == li:
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise IngestionError(f"non-numeric value {cell!r} in column '{header[j]}'", row=rownum) from None
                if not np.isfinite(vals[-1]):
                    raise IngestionError(f"non-finite value in column '{header[j]}'", row=rownum)
            feats.append(vals)
            labels.append(row[li].strip())
    if not labels:
        raise IngestionError(f"{path} has no data rows", row=2)
    missing = [k for k in known if k not in labels]
    if missing:
        raise ConfigurationError(f"known classes {missing} never occur in {path}", key="known_classes")
    X = np.asarray(feats, dtype=float)
    label_of = {k: i for i, k in enumerate(known)}
    y_all = np.array([label_of.get(lab, UNKNOWN) for lab in labels])

    test_mask = np.zeros(len(y_all), dtype=bool)
    for k in range(len(known)):
        rows = np.flatnonzero(y_all == k)
        n_te = int(round(test_fraction * len(rows)))
        test_mask[rng.choice(rows, size=n_te, replace=False)] = True

    mean, std = fit_standardizer(X[~test_mask])
    Xs = (X - mean) / std
    source_names = sorted(set(labels))
    n_unknown_sources = len(set(labels) - set(known))
    return OpenSetDataset(
        X=Xs[~test_mask], y=y_all[~test_mask], X_test=Xs[test_mask], y_test=y_all[test_mask],
        n_known=len(known), openness=n_unknown_sources / len(source_names),
        source_train=np.array([source_names.index(lab) for lab, t in zip(labels, test_mask) if not t]),
        class_names=known, feature_mean=mean, feature_std=std,
    )


@dataclass(frozen=True)
class PoolState:
    """Sorted index arrays partitioning the training rows."""

    labeled_known: np.ndarray
    labeled_unknown: np.ndarray
    unlabeled: np.ndarray

    @property
    def labeled(self) -> np.ndarray:
        return np.sort(np.concatenate([self.labeled_known, self.labeled_unknown]))

    def validate(self, dataset: OpenSetDataset):
        parts = np.concatenate([self.labeled_known, self.labeled_unknown, self.unlabeled])
        if len(parts) != dataset.n_train or not np.array_equal(np.sort(parts), np.arange(dataset.n_train)):
            raise PoolError("pools are not a partition of the training rows")
        if np.any(dataset.y[self.labeled_known] == UNKNOWN):
            raise PoolError("unknown example in labeled_known")
        if np.any(dataset.y[self.labeled_unknown] != UNKNOWN):
            raise PoolError("known example in labeled_unknown")

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.labeled_known, self.labeled_unknown, self.unlabeled):
            h.update(np.asarray(a, dtype=np.int64).tobytes())
            h.update(b"|")
        return h.hexdigest()[:16]


def _idx(a) -> np.ndarray:
    return np.sort(np.asarray(a, dtype=np.int64))


def init_pools(dataset: OpenSetDataset, initial_per_class: int, rng: np.random.Generator) -> PoolState:
    chosen = []
    for k in range(dataset.n_known):
        rows = np.flatnonzero(dataset.y == k)
        if len(rows) < initial_per_class:
            raise ConfigurationError(
                f"class {k} has {len(rows)} training rows, fewer than initial_per_class={initial_per_class}",
                key="initial_per_class")
        chosen.append(rng.choice(rows, size=initial_per_class, replace=False))
    known = _idx(np.concatenate(chosen))
    rest = np.setdiff1d(np.arange(dataset.n_train), known)
    return PoolState(known, _idx([]), _idx(rest))


def sample_subset(pool: PoolState, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw without replacement from the unlabeled pool (all of it if too small)."""
    if size >= len(pool.unlabeled):
        return pool.unlabeled.copy()
    return _idx(rng.choice(pool.unlabeled, size=int(size), replace=False))


def apply_oracle(pool: PoolState, queried, dataset: OpenSetDataset):
    """Reveal labels of ``queried`` and move them into the labeled pools.

    Returns ``(new_pool, r, counts)`` where ``r`` is the known fraction of the
    query and ``counts[k]`` the number of queried rows of known class ``k``
    (``counts[-1]`` counts unknowns).
    """
    q = np.asarray(queried, dtype=np.int64)
    if q.size == 0:
        raise PoolError("empty query")
    if len(np.unique(q)) != len(q):
        raise PoolError("duplicate indices in query")
    if not np.all(np.isin(q, pool.unlabeled)):
        raise PoolError(f"queried indices not unlabeled: {np.setdiff1d(q, pool.unlabeled)[:10].tolist()}")
    labels = dataset.y[q]
    is_known = labels != UNKNOWN
    counts = np.bincount(np.where(is_known, labels, dataset.n_known), minlength=dataset.n_known + 1)
    new = PoolState(
        _idx(np.concatenate([pool.labeled_known, q[is_known]])),
        _idx(np.concatenate([pool.labeled_unknown, q[~is_known]])),
        np.setdiff1d(pool.unlabeled, q),
    )
    return new, float(is_known.sum() / len(q)), counts
