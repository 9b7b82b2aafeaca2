"""Acquisition functions: classical uncertainty, k-center greedy, and bidirectional scores.

Uncertainty functions take a probability row or a ``[n, K]`` matrix and
return one value per row; larger always means "query this first".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PoolState
from .errors import ConfigurationError, NumericalError
from .trainer import PredictionSnapshot

STRATEGIES = ("Random", "LC", "Margin", "Entropy", "Coreset", "B-LC", "B-Margin", "B-Entropy")
FAMILIES = ("LC", "Margin", "Entropy")


def unc_least_confident(p) -> np.ndarray:
    return 1.0 - np.max(p, axis=-1)


def unc_margin(p, literal: bool = False) -> np.ndarray:
    """``1 - (p_top1 - p_top2)``; ``literal=True`` returns the raw gap instead."""
    top2 = -np.partition(-np.asarray(p), 1, axis=-1)[..., :2]
    gap = top2[..., 0] - top2[..., 1]
    return gap if literal else 1.0 - gap


def unc_entropy_top(p, full: bool = False) -> np.ndarray:
    """``-p_max ln p_max`` (0 when ``p_max`` is 0); ``full=True`` gives Shannon entropy."""
    p = np.asarray(p, dtype=float)
    if full:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, -p * np.log(p), 0.0)
        return terms.sum(axis=-1)
    pm = np.max(p, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pm > 0, -pm * np.log(pm), 0.0)


def uncertainty(p, family: str, literal_eq4: bool = False, full_entropy: bool = False) -> np.ndarray:
    if family == "LC":
        return unc_least_confident(p)
    if family == "Margin":
        return unc_margin(p, literal=literal_eq4)
    if family == "Entropy":
        return unc_entropy_top(p, full=full_entropy)
    raise ConfigurationError(f"unknown uncertainty family {family!r}", key="strategy")


@dataclass
class ScoreTable:
    """Bidirectional scores with their components, sorted best-first."""

    indices: np.ndarray
    score: np.ndarray
    p_aux: np.ndarray
    r: float
    unc_p: np.ndarray
    unc_n: np.ndarray

    def __len__(self):
        return len(self.indices)

    def top(self, b: int) -> np.ndarray:
        return self.indices[:b]


def combine(p_aux, unc_n, unc_p, r):
    """``p_aux * unc_n + r * (1 - p_aux) * unc_p``."""
    return p_aux * unc_n + r * (1.0 - p_aux) * unc_p


def rank(indices, scores) -> np.ndarray:
    """Positions sorted by descending score, lower index first on ties."""
    return np.lexsort((np.asarray(indices), -np.asarray(scores)))


def bidirectional_scores(snapshot: PredictionSnapshot, r: float, family: str,
                         literal_eq4: bool = False, full_entropy: bool = False) -> ScoreTable:
    if not 0.0 <= r <= 1.0:
        raise ConfigurationError(f"r={r} outside [0, 1]")
    if snapshot.negative is None:
        raise ConfigurationError("bidirectional scoring needs negative-head predictions")
    unc_p = uncertainty(snapshot.positive, family, literal_eq4, full_entropy)
    unc_n = uncertainty(snapshot.negative, family, literal_eq4, full_entropy)
    p_aux = np.asarray(snapshot.aux_unknown, dtype=float)
    score = combine(p_aux, unc_n, unc_p, r)
    bad = ~(np.isfinite(score) & np.isfinite(unc_p) & np.isfinite(unc_n) & np.isfinite(p_aux))
    if np.any(bad):
        raise NumericalError(f"non-finite acquisition score for example {int(snapshot.indices[bad][0])}")
    order = rank(snapshot.indices, score)
    return ScoreTable(snapshot.indices[order], score[order], p_aux[order], float(r), unc_p[order], unc_n[order])


def top_b(indices, scores, b: int) -> np.ndarray:
    return np.asarray(indices)[rank(indices, scores)[:b]]


def kcenter_greedy(features: np.ndarray, seed_set, b: int) -> list[int]:
    """Greedy farthest-point selection of ``b`` rows of ``features``.

    Each pick maximises the Euclidean distance to its nearest seed or
    previously picked row; ties go to the lower row. Without seeds the first
    pick is the row farthest from the centroid.
    """
    X = np.asarray(features, dtype=float)
    n = len(X)
    seeds = [int(s) for s in seed_set]
    if b > n - len(set(seeds)):
        raise ConfigurationError(f"cannot pick {b} centers from {n - len(set(seeds))} free points")
    taken = np.zeros(n, dtype=bool)
    taken[seeds] = True
    if seeds:
        d2 = ((X[:, None, :] - X[None, seeds, :]) ** 2).sum(-1).min(axis=1)
    else:
        d2 = ((X - X.mean(axis=0)) ** 2).sum(-1)
    picks = []
    for _ in range(b):
        j = int(np.argmax(np.where(taken, -np.inf, d2)))
        picks.append(j)
        taken[j] = True
        dj = ((X - X[j]) ** 2).sum(-1)
        # the centroid only picks the first center; it is not a center itself
        d2 = np.minimum(d2, dj) if seeds or len(picks) > 1 else dj
    return picks


def select_batch(strategy: str, snapshot: PredictionSnapshot, pool: PoolState, b: int, r_prev: float,
                 rng: np.random.Generator, embedding: np.ndarray | None = None,
                 literal_eq4: bool = False, full_entropy: bool = False) -> np.ndarray:
    """Indices (into the training rows) of the ``b`` candidates to label next.

    Candidates are the rows of ``snapshot`` (the unlabeled pool). ``embedding``
    holds one feature row per training example and is required by Coreset.
    """
    cand = np.asarray(snapshot.indices)
    if b > len(cand):
        raise ConfigurationError(f"budget {b} exceeds {len(cand)} candidates", key="budget")
    if strategy == "Random":
        return np.sort(rng.choice(cand, size=b, replace=False))
    if strategy in FAMILIES:
        return top_b(cand, uncertainty(snapshot.positive, strategy, literal_eq4, full_entropy), b)
    if strategy.startswith("B-") and strategy[2:] in FAMILIES:
        return bidirectional_scores(snapshot, r_prev, strategy[2:], literal_eq4, full_entropy).top(b)
    if strategy == "Coreset":
        if embedding is None:
            raise ConfigurationError("Coreset needs an embedding of the training rows")
        labeled = pool.labeled
        rows = np.concatenate([labeled, cand])
        picks = kcenter_greedy(embedding[rows], range(len(labeled)), b)
        return rows[picks]
    raise ConfigurationError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}", key="strategy")
