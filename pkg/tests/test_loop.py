from dataclasses import replace

import numpy as np
import pytest

from bual.data import UNKNOWN, ring_spec
from bual.errors import ConfigurationError, RoundAborted
from bual.loop import (ExperimentAborted, ExperimentPlan, RoundRecord, aggregate, evaluate_accuracy, initial_state,
                       recognition_rate, run_comparison, run_experiment, run_round, run_seed)
from bual.nn import Network
from bual.trainer import TrainSchedule

PLAN = ExperimentPlan(data=ring_spec(n_known=4, openness=0.5, n_train=40, n_test=20), strategy="B-Margin",
                      rounds=3, budget=10, seeds=(0, 1), initial_per_class=3,
                      schedule=TrainSchedule(epoch_scale=0.1, hidden=(16,), subset_size=50))


@pytest.fixture(scope="module")
def bmargin():
    return run_experiment(PLAN)


def test_record_shape(bmargin):
    assert sorted(bmargin) == [0, 1]
    for seed, recs in bmargin.items():
        assert [r.round for r in recs] == [0, 1, 2]
        for r in recs:
            assert r.seed == seed and r.strategy == "B-Margin"
            assert len(r.queried) == PLAN.budget
            assert 0.0 <= r.r <= 1.0 and 0.0 <= r.accuracy <= 1.0
            assert r.recognition_rate == r.r
            assert r.audit is not None and len(r.audit) >= PLAN.budget


def test_budget_conservation_and_disjoint_queries(bmargin):
    for seed, recs in bmargin.items():
        state = initial_state(PLAN, seed)
        queried = np.concatenate([r.queried for r in recs])
        assert len(np.unique(queried)) == len(queried)
        assert not set(queried) & set(state.pool.labeled_known)
        # labeled known grows by exactly the known part of each query
        counts = [r.labeled_known for r in recs]
        assert counts[0] == len(state.pool.labeled_known)
        for prev, nxt in zip(recs, recs[1:]):
            assert nxt.labeled_known == prev.labeled_known + round(prev.r * PLAN.budget)


def test_r_matches_oracle(bmargin):
    ds = initial_state(PLAN, 0).dataset
    for r in bmargin[0]:
        assert r.r == pytest.approx(np.mean(ds.y[r.queried] != UNKNOWN))


def test_r_feeds_next_round(bmargin):
    recs = bmargin[0]
    assert recs[0].audit.r == 1.0
    for prev, nxt in zip(recs, recs[1:]):
        assert nxt.audit.r == prev.r


def test_audit_reproduces_scores(bmargin):
    for recs in bmargin.values():
        for r in recs:
            a = r.audit
            redo = a.p_aux * a.unc_n + a.r * (1 - a.p_aux) * a.unc_p
            assert np.max(np.abs(redo - a.score)) <= 1e-12
            assert set(a.top(PLAN.budget)) == set(r.queried)


def test_same_plan_twice_is_identical(bmargin):
    again = run_experiment(PLAN)
    for seed in bmargin:
        for a, b in zip(bmargin[seed], again[seed]):
            assert np.array_equal(a.queried, b.queried) and a.accuracy == b.accuracy and a.r == b.r
    assert aggregate(bmargin) == aggregate(again)


def test_round_shrinks_unlabeled_by_budget():
    state = initial_state(PLAN, 0)
    n0 = len(state.pool.unlabeled)
    new, rec = run_round(state, PLAN, 0)
    assert len(new.pool.unlabeled) == n0 - PLAN.budget
    new.pool.validate(new.dataset)
    assert new.r_prev == rec.r


def test_strategy_does_not_touch_test_split():
    a = initial_state(PLAN, 0)
    b = initial_state(replace(PLAN, strategy="Random"), 0)
    assert np.array_equal(a.dataset.X_test, b.dataset.X_test)
    assert a.pool.digest() == b.pool.digest()


def test_closed_set_degeneration_end_to_end():
    plan = replace(PLAN, data=ring_spec(n_known=4, openness=0.0, n_train=40, n_test=20), seeds=(3,))
    for family in ("LC", "Margin", "Entropy"):
        out = run_comparison(plan, [family, "B-" + family])
        for a, b in zip(out[family][3], out["B-" + family][3]):
            assert np.array_equal(a.queried, b.queried)
            assert a.accuracy == b.accuracy and a.r == b.r == 1.0


@pytest.mark.parametrize("strategy", ["Random", "Coreset", "LC", "B-Entropy"])
def test_every_strategy_runs(strategy):
    recs = run_seed(replace(PLAN, strategy=strategy, rounds=2), 0)
    assert len(recs) == 2
    assert not set(recs[0].queried) & set(recs[1].queried)


def test_warm_start_changes_training():
    cold = run_seed(replace(PLAN, strategy="Margin"), 0)
    warm = run_seed(replace(PLAN, strategy="Margin", warm_start=True), 0)
    assert np.array_equal(cold[0].queried, warm[0].queried)
    assert any(not np.array_equal(a.queried, b.queried) or a.accuracy != b.accuracy
               for a, b in zip(cold[1:], warm[1:]))


def test_budget_exceeding_pool_rejected():
    with pytest.raises(ConfigurationError):
        initial_state(replace(PLAN, rounds=100, budget=50), 0)


def test_plan_validation():
    with pytest.raises(ConfigurationError):
        replace(PLAN, strategy="Nope")
    with pytest.raises(ConfigurationError):
        replace(PLAN, seeds=())


def test_numeric_failure_names_phase(monkeypatch):
    import bual.loop as loop

    def boom(*a, **k):
        raise FloatingPointError("nan loss")

    monkeypatch.setattr(loop, "train_negative", boom)
    with pytest.raises(RoundAborted) as err:
        run_round(initial_state(PLAN, 0), PLAN, 0)
    assert err.value.phase == "negative" and err.value.round_index == 0


def test_failed_seed_keeps_partial_results(monkeypatch):
    import bual.loop as loop
    real = loop.run_seed

    def flaky(plan, seed, state=None):
        if seed == 1:
            raise RuntimeError("disk on fire")
        return real(plan, seed, state)

    monkeypatch.setattr(loop, "run_seed", flaky)
    with pytest.raises(ExperimentAborted) as err:
        loop.run_experiment(PLAN)
    assert list(err.value.partial) == [0]


def linear_net(W):
    W = np.asarray(W, dtype=float)
    return Network([W], [np.zeros(len(W))])


def test_accuracy_examples():
    ds = initial_state(PLAN, 0).dataset
    # a constant predictor on the balanced 4-class test split
    const = Network([np.zeros((4, 2))], [np.array([5.0, 0, 0, 0])])
    assert evaluate_accuracy(const, ds) == pytest.approx(0.25)


def test_accuracy_perfect_and_majority():
    from bual.data import OpenSetDataset
    X_test = np.array([[1.0, 0.0]] * 3 + [[0.0, 1.0]] * 2)
    y_test = np.array([0, 0, 0, 1, 1])
    ds = OpenSetDataset(np.zeros((2, 2)), np.array([0, 1]), X_test, y_test, 2, 0.0)
    assert evaluate_accuracy(linear_net(np.eye(2)), ds) == 1.0
    majority = Network([np.zeros((2, 2))], [np.array([1.0, 0.0])])
    assert evaluate_accuracy(majority, ds) == pytest.approx(0.6)


def test_aggregate_single_seed_has_zero_std(bmargin):
    rows = aggregate({0: bmargin[0]})
    assert len(rows) == PLAN.rounds
    assert all(r["acc_std"] == 0.0 and r["r_std"] == 0.0 for r in rows)


def test_aggregate_mean_and_population_std(bmargin):
    rows = aggregate(bmargin)
    acc = np.array([[r.accuracy for r in bmargin[s]] for s in (0, 1)])
    assert np.allclose([r["acc_mean"] for r in rows], acc.mean(axis=0))
    assert np.allclose([r["acc_std"] for r in rows], acc.std(axis=0))


def test_recognition_rate_pools_every_query():
    def rec(r, n):
        return RoundRecord("x", 0, 0, 0, np.arange(n), r, 0.5, 0.0)

    assert recognition_rate([rec(0.5, 10), rec(1.0, 30)]) == pytest.approx(35 / 40)
