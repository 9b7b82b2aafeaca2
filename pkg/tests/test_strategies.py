import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bual.data import PoolState
from bual.errors import ConfigurationError, NumericalError
from bual.strategies import (STRATEGIES, bidirectional_scores, combine, kcenter_greedy, select_batch,
                             unc_entropy_top, unc_least_confident, unc_margin, uncertainty)
from bual.trainer import PredictionSnapshot

probs = st.integers(2, 6).flatmap(
    lambda k: st.lists(st.floats(0.01, 10), min_size=k, max_size=k)).map(lambda w: np.array(w) / np.sum(w))


def snapshot(pos, neg=None, aux=None, idx=None):
    pos = np.asarray(pos, dtype=float)
    n = len(pos)
    return PredictionSnapshot(np.arange(n) if idx is None else np.asarray(idx),
                              pos, None if neg is None else np.asarray(neg, dtype=float),
                              np.zeros(n) if aux is None else np.asarray(aux, dtype=float))


@pytest.mark.parametrize("p,want", [([1, 0, 0, 0], 0.0), ([0.25] * 4, 0.75), ([0.6, 0.3, 0.1], 0.4)])
def test_least_confident(p, want):
    assert unc_least_confident(np.array(p)) == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("p,want", [([1, 0], 0.0), ([0.25] * 4, 1.0), ([0.6, 0.3, 0.1], 0.7)])
def test_margin(p, want):
    assert unc_margin(np.array(p)) == pytest.approx(want, abs=1e-15)


def test_margin_literal_is_raw_gap():
    assert unc_margin(np.array([0.6, 0.3, 0.1]), literal=True) == pytest.approx(0.3)


@pytest.mark.parametrize("pmax,want", [(1.0, 0.0), (0.5, 0.5 * np.log(2)), (1 / np.e, 1 / np.e)])
def test_entropy_top(pmax, want):
    rest = (1 - pmax) / 3
    assert unc_entropy_top(np.array([pmax, rest, rest, rest])) == pytest.approx(want, abs=1e-15)


def test_entropy_top_handles_zero_and_full_variant():
    assert unc_entropy_top(np.zeros(3)) == 0.0
    p = np.array([0.5, 0.25, 0.25])
    assert unc_entropy_top(p, full=True) == pytest.approx(1.5 * np.log(2))


def test_entropy_top_peaks_at_inverse_e():
    grid = np.linspace(1 / 3, 1, 10_000)
    vals = unc_entropy_top(np.stack([grid, (1 - grid) / 2, (1 - grid) / 2], axis=1))
    assert vals.max() == pytest.approx(1 / np.e, abs=1e-6)
    assert grid[np.argmax(vals)] == pytest.approx(1 / np.e, abs=1e-3)


@given(probs, st.randoms(use_true_random=False))
def test_uncertainties_permutation_invariant(p, rnd):
    perm = list(range(len(p)))
    rnd.shuffle(perm)
    for fam in ("LC", "Margin", "Entropy"):
        assert uncertainty(p, fam) == pytest.approx(uncertainty(p[perm], fam), abs=1e-15)


@given(probs)
def test_uncertainty_ranges(p):
    k = len(p)
    assert -1e-12 <= unc_least_confident(p) <= 1 - 1 / k + 1e-12
    assert -1e-12 <= unc_margin(p) <= 1 + 1e-12
    assert 0 <= unc_entropy_top(p) <= 1 / np.e + 1e-12


def test_unknown_family():
    with pytest.raises(ConfigurationError):
        uncertainty(np.array([0.5, 0.5]), "Variance")


def test_combine_hand_case():
    assert abs(combine(0.3, 0.5, 0.9, 0.8) - 0.654) < 1e-12


def test_closed_set_scores_equal_positive_uncertainty():
    rng = np.random.default_rng(0)
    pos, neg = rng.dirichlet(np.ones(4), 30), rng.dirichlet(np.ones(4), 30)
    table = bidirectional_scores(snapshot(pos, neg), 1.0, "LC")
    assert np.allclose(table.score, unc_least_confident(pos)[table.indices], atol=0)


def test_full_aux_scores_equal_negative_uncertainty():
    rng = np.random.default_rng(1)
    pos, neg = rng.dirichlet(np.ones(4), 30), rng.dirichlet(np.ones(4), 30)
    for r in (0.0, 0.4, 1.0):
        table = bidirectional_scores(snapshot(pos, neg, aux=np.ones(30)), r, "Margin")
        assert np.array_equal(table.score, unc_margin(neg)[table.indices])


def test_score_table_audit_reproduces_formula():
    rng = np.random.default_rng(2)
    n = 200
    snap = snapshot(rng.dirichlet(np.ones(5), n), rng.dirichlet(np.ones(5), n), aux=rng.uniform(size=n),
                    idx=rng.permutation(1000)[:n])
    t = bidirectional_scores(snap, 0.37, "Entropy")
    redo = t.p_aux * t.unc_n + t.r * (1 - t.p_aux) * t.unc_p
    assert np.max(np.abs(redo - t.score)) <= 1e-12
    assert np.all(np.diff(t.score) <= 0)


def test_ties_go_to_lower_index():
    p = np.full((4, 2), 0.5)
    snap = snapshot(p, p, idx=[30, 10, 20, 5])
    assert list(bidirectional_scores(snap, 1.0, "LC").top(4)) == [5, 10, 20, 30]


def test_non_finite_component_names_example():
    p = np.full((3, 2), 0.5)
    neg = p.copy()
    neg[1, 0] = np.nan
    with pytest.raises(NumericalError, match="example 11"):
        bidirectional_scores(snapshot(p, neg, aux=[0.5, 0.5, 0.5], idx=[10, 11, 12]), 0.5, "LC")


def test_r_out_of_range():
    p = np.full((2, 2), 0.5)
    with pytest.raises(ConfigurationError):
        bidirectional_scores(snapshot(p, p), 1.5, "LC")


@settings(max_examples=50)
@given(st.floats(0, 0.999), st.floats(0.001, 1), st.floats(0, 1), st.floats(0, 0.9), st.floats(1e-6, 0.1))
def test_score_increases_with_positive_uncertainty(p_aux, r, unc_n, unc_p, step):
    assert combine(p_aux, unc_n, unc_p + step, r) > combine(p_aux, unc_n, unc_p, r)


def empty_pool(n):
    e = np.array([], dtype=np.int64)
    return PoolState(e, e, np.arange(n))


@pytest.mark.parametrize("strategy", ["LC", "Margin", "Entropy", "B-LC", "B-Margin", "B-Entropy"])
def test_scale_free_argmax(strategy):
    # with p_aux = 0 every bidirectional score is r * unc_p, so changing r rescales them all
    rng = np.random.default_rng(3)
    pos, neg = rng.dirichlet(np.ones(4), 40), rng.dirichlet(np.ones(4), 40)
    snap = snapshot(pos, neg)
    a = select_batch(strategy, snap, empty_pool(40), 7, 1.0, rng)
    b = select_batch(strategy, snap, empty_pool(40), 7, 0.25, rng)
    assert set(a) == set(b)


def test_top_b_contract():
    pos = np.array([[0.55, 0.45], [0.75, 0.25], [0.95, 0.05]])  # margin unc 0.9, 0.5, 0.1
    assert list(select_batch("Margin", snapshot(pos), empty_pool(3), 2, 1.0, np.random.default_rng(0))) == [0, 1]


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_full_budget_returns_every_candidate(strategy):
    rng = np.random.default_rng(4)
    n = 12
    snap = snapshot(rng.dirichlet(np.ones(3), n), rng.dirichlet(np.ones(3), n), idx=np.arange(10, 10 + n))
    pool = PoolState(np.arange(10), np.array([], dtype=np.int64), np.arange(10, 10 + n))
    emb = rng.normal(size=(10 + n, 4))
    got = select_batch(strategy, snap, pool, n, 1.0, rng, embedding=emb)
    assert sorted(got) == list(range(10, 10 + n))


@pytest.mark.parametrize("family", ["LC", "Margin", "Entropy"])
def test_closed_set_bidirectional_matches_classical(family):
    rng = np.random.default_rng(5)
    snap = snapshot(rng.dirichlet(np.ones(4), 50), rng.dirichlet(np.ones(4), 50))
    a = select_batch(family, snap, empty_pool(50), 9, 1.0, rng)
    b = select_batch("B-" + family, snap, empty_pool(50), 9, 1.0, rng)
    assert np.array_equal(a, b)


def test_budget_larger_than_candidates():
    with pytest.raises(ConfigurationError):
        select_batch("Random", snapshot(np.full((3, 2), 0.5)), empty_pool(3), 4, 1.0, np.random.default_rng(0))


def test_random_is_uniform_without_replacement():
    n, b = 20, 5
    counts = np.zeros(n)
    rng = np.random.default_rng(0)
    for _ in range(4000):
        q = select_batch("Random", snapshot(np.full((n, 2), 0.5)), empty_pool(n), b, 1.0, rng)
        assert len(set(q)) == b
        counts[q] += 1
    expected = 4000 * b / n
    assert np.all(np.abs(counts - expected) < 4 * np.sqrt(expected))


def test_unknown_strategy():
    with pytest.raises(ConfigurationError):
        select_batch("BADGE", snapshot(np.full((3, 2), 0.5)), empty_pool(3), 1, 1.0, np.random.default_rng(0))


def test_coreset_requires_embedding():
    with pytest.raises(ConfigurationError):
        select_batch("Coreset", snapshot(np.full((3, 2), 0.5)), empty_pool(3), 1, 1.0, np.random.default_rng(0))


def brute_force_kcenter(points, seeds, b):
    """Straight transcription of greedy farthest-point selection with explicit loops."""
    pts = [list(map(float, p)) for p in points]
    chosen = list(seeds)
    picks = []

    def d2(a, c):
        return sum((x - y) ** 2 for x, y in zip(pts[a], pts[c]))

    for _ in range(b):
        best, best_val = None, None
        for i in range(len(pts)):
            if i in chosen:
                continue
            if chosen:
                val = min(d2(i, c) for c in chosen)
            else:
                centroid = [sum(col) / len(pts) for col in zip(*pts)]
                val = sum((x - y) ** 2 for x, y in zip(pts[i], centroid))
            if best_val is None or val > best_val:
                best, best_val = i, val
        picks.append(best)
        chosen.append(best)
    return picks


def test_kcenter_line_example():
    pts = np.array([[0.0], [1.0], [10.0]])
    assert kcenter_greedy(pts, [0], 1) == [2]
    assert kcenter_greedy(pts, [0], 2) == [2, 1]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_kcenter_matches_brute_force(seed, grid):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 13))
    pts = rng.integers(-3, 4, size=(n, 2)).astype(float) if grid else rng.normal(size=(n, 3))
    n_seed = int(rng.integers(0, n))
    seeds = sorted(rng.choice(n, size=n_seed, replace=False).tolist())
    b = int(rng.integers(1, n - n_seed + 1))
    assert kcenter_greedy(pts, seeds, b) == brute_force_kcenter(pts, seeds, b)


def test_kcenter_too_many():
    with pytest.raises(ConfigurationError):
        kcenter_greedy(np.zeros((3, 2)), [0], 3)
