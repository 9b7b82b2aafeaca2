"""Round orchestration: train, score, query, reveal labels, evaluate."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import UNKNOWN, ClusterSpec, OpenSetDataset, PoolState, apply_oracle, init_pools, load_csv, make_synthetic, \
    ring_spec, sample_subset
from .errors import ConfigurationError, PoolError, RoundAborted
from .nn import Network, OptimizerConfig, forward
from .strategies import STRATEGIES, ScoreTable, bidirectional_scores, select_batch
from .trainer import TrainSchedule, build_snapshot, train_aux, train_negative, train_positive

# Fixed stream tags so every (seed, round, phase) owns an independent generator.
# Strategies that skip a phase therefore never shift another phase's draws.
_PHASES = {"positive": 1, "subset": 2, "negative": 3, "aux": 4, "select": 5}
_DATA_TAG = 7_000_001
_POOL_TAG = 7_000_002


def stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *tags])


@dataclass(frozen=True)
class CsvSource:
    path: str
    label_column: str = "label"
    known_classes: tuple = ()
    test_fraction: float = 0.2


@dataclass(frozen=True)
class ExperimentPlan:
    data: ClusterSpec | CsvSource = field(default_factory=ring_spec)
    strategy: str = "B-Margin"
    rounds: int = 8
    budget: int = 40
    seeds: tuple = (0, 1, 2)
    initial_per_class: int = 5
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    literal_eq4: bool = False
    full_entropy: bool = False
    freeze_backbone: bool = False
    warm_start: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}", key="strategy")
        if self.rounds < 1 or self.budget < 1:
            raise ConfigurationError("rounds and budget must be >= 1", key="rounds")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required", key="seeds")


@dataclass
class RoundRecord:
    """One query round.

    ``accuracy`` belongs to the positive classifier trained at the start of
    the round on ``labeled_known`` examples; ``queried``/``r`` describe the
    batch chosen by that round.
    """

    strategy: str
    seed: int
    round: int
    labeled_known: int
    queried: np.ndarray
    r: float
    accuracy: float
    wall_s: float
    pool_digest: str = ""
    audit: ScoreTable | None = field(default=None, repr=False)

    @property
    def recognition_rate(self) -> float:
        return self.r


@dataclass
class RunState:
    seed: int
    dataset: OpenSetDataset
    pool: PoolState
    r_prev: float = 1.0
    f_p: Network | None = None


def build_dataset(source, seed: int) -> OpenSetDataset:
    if isinstance(source, CsvSource):
        return load_csv(source.path, source.label_column, source.known_classes, source.test_fraction,
                        rng=stream(seed, _DATA_TAG))
    return make_synthetic(source, stream(seed, _DATA_TAG))


def initial_state(plan: ExperimentPlan, seed: int) -> RunState:
    """Dataset and initial pool for ``seed``; identical for every strategy."""
    dataset = build_dataset(plan.data, seed)
    pool = init_pools(dataset, plan.initial_per_class, stream(seed, _POOL_TAG))
    if plan.rounds * plan.budget > len(pool.unlabeled):
        raise ConfigurationError(
            f"{plan.rounds} rounds x {plan.budget} exceed the {len(pool.unlabeled)} unlabeled examples", key="rounds")
    return RunState(seed, dataset, pool)


def evaluate_accuracy(f_p: Network, dataset: OpenSetDataset) -> float:
    """Fraction of known-class test rows whose argmax prediction is correct."""
    if len(dataset.y_test) == 0:
        raise ConfigurationError("empty test split")
    pred = np.argmax(forward(f_p, dataset.X_test), axis=1)
    return float(np.mean(pred == dataset.y_test))


def run_round(state: RunState, plan: ExperimentPlan, round_index: int):
    """Execute one round and return ``(new_state, record)``.

    Any failure is re-raised as :class:`RoundAborted` naming the phase.
    """
    t0 = time.perf_counter()
    ds, pool, seed = state.dataset, state.pool, state.seed
    if len(pool.unlabeled) < plan.budget:
        raise RoundAborted(round_index, "setup", f"only {len(pool.unlabeled)} unlabeled examples left")

    def rng(phase):
        return stream(seed, round_index, _PHASES[phase])

    phase = "positive"
    try:
        init = state.f_p if plan.warm_start else None
        f_p = train_positive(pool, ds, plan.schedule, plan.optimizer, rng("positive"), init=init)
        negatives, f_aux, embedding = None, None, None
        if plan.strategy.startswith("B-"):
            phase = "negative"
            subset = sample_subset(pool, plan.schedule.subset_size, rng("subset"))
            _, negatives = train_negative(f_p, pool, subset, ds, plan.schedule, plan.optimizer, rng("negative"),
                                          freeze_backbone=plan.freeze_backbone)
            phase = "aux"
            f_aux = train_aux(pool, ds, plan.schedule, plan.optimizer, rng("aux"))
        if plan.strategy == "Coreset":
            embedding = f_p.hidden(ds.X)
        phase = "select"
        snap = build_snapshot(f_p, f_aux, negatives, pool, ds)
        audit = None
        if plan.strategy.startswith("B-"):
            audit = bidirectional_scores(snap, state.r_prev, plan.strategy[2:], plan.literal_eq4, plan.full_entropy)
        queried = select_batch(plan.strategy, snap, pool, plan.budget, state.r_prev, rng("select"),
                               embedding=embedding, literal_eq4=plan.literal_eq4, full_entropy=plan.full_entropy)
        phase = "oracle"
        new_pool, r, _ = apply_oracle(pool, queried, ds)
        new_pool.validate(ds)
        if len(new_pool.unlabeled) != len(pool.unlabeled) - plan.budget:
            raise PoolError("unlabeled pool did not shrink by the budget")
        phase = "evaluate"
        acc = evaluate_accuracy(f_p, ds)
    except RoundAborted:
        raise
    except Exception as exc:
        raise RoundAborted(round_index, phase, exc) from exc

    record = RoundRecord(plan.strategy, seed, round_index, len(pool.labeled_known), np.asarray(queried), r, acc,
                         time.perf_counter() - t0, pool.digest(), audit)
    return RunState(seed, ds, new_pool, r, f_p), record


class ExperimentAborted(RuntimeError):
    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def run_seed(plan: ExperimentPlan, seed: int, state: RunState | None = None) -> list[RoundRecord]:
    state = state or initial_state(plan, seed)
    state.pool.validate(state.dataset)
    records, seen = [], set()
    for i in range(plan.rounds):
        state, rec = run_round(state, plan, i)
        q = set(rec.queried.tolist())
        if q & seen:
            raise PoolError(f"round {i} re-queried examples {sorted(q & seen)[:5]}")
        seen |= q
        records.append(rec)
    return records


def run_experiment(plan: ExperimentPlan) -> dict[int, list[RoundRecord]]:
    """Run every seed independently; a failing seed raises :class:`ExperimentAborted` with the runs so far."""
    results = {}
    for seed in plan.seeds:
        try:
            results[seed] = run_seed(plan, seed)
        except Exception as exc:
            raise ExperimentAborted(f"seed {seed}: {exc}", results) from exc
    return results


def separation_data(plan: ExperimentPlan, seed: int):
    """Round-0 confidences on the unlabeled pool.

    Trains ``f_p`` and the negative head exactly as the first round of a
    bidirectional strategy would, and returns ``(indices, is_known,
    max_prob_positive, max_prob_negative)`` where the negative column is the
    maximum of the snapshot-averaged probabilities.
    """
    state = initial_state(replace(plan, rounds=1), seed)
    ds, pool = state.dataset, state.pool
    f_p = train_positive(pool, ds, plan.schedule, plan.optimizer, stream(seed, 0, _PHASES["positive"]))
    subset = sample_subset(pool, plan.schedule.subset_size, stream(seed, 0, _PHASES["subset"]))
    _, snaps = train_negative(f_p, pool, subset, ds, plan.schedule, plan.optimizer,
                              stream(seed, 0, _PHASES["negative"]), freeze_backbone=plan.freeze_backbone)
    snap = build_snapshot(f_p, None, snaps, pool, ds)
    return pool.unlabeled, ds.y[pool.unlabeled] != UNKNOWN, snap.positive.max(axis=1), snap.negative.max(axis=1)


def run_comparison(plan: ExperimentPlan, strategies) -> dict[str, dict[int, list[RoundRecord]]]:
    """Run several strategies on identical per-seed datasets and initial pools."""
    out = {}
    for name in strategies:
        out[name] = run_experiment(replace(plan, strategy=name))
    return out


def aggregate(results: dict[int, list[RoundRecord]]):
    """Per-round mean and population std over seeds of accuracy and r."""
    rows = []
    per_seed = [results[s] for s in sorted(results)]
    n_rounds = min(len(r) for r in per_seed)
    for i in range(n_rounds):
        acc = np.array([r[i].accuracy for r in per_seed])
        rr = np.array([r[i].r for r in per_seed])
        rows.append({"strategy": per_seed[0][i].strategy, "round": i, "acc_mean": float(acc.mean()),
                     "acc_std": float(acc.std()), "r_mean": float(rr.mean()), "r_std": float(rr.std())})
    return rows


def recognition_rate(records: list[RoundRecord]) -> float:
    """Known fraction over every example queried in the run."""
    known = sum(round(r.r * len(r.queried)) for r in records)
    return known / sum(len(r.queried) for r in records)
