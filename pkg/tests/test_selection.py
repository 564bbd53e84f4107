import numpy as np
import pytest

from mbo_epbii.algorithms.epbii import compute_theta_ref, territory
from mbo_epbii.algorithms.pareto import NadirUtopia, nondominated_sort, sld_vectors
from mbo_epbii.algorithms.selection import (CandidateTable, NicheState, build_candidate_table, correction,
                                            fitness, initial_niche_state, niche_count, niche_counts,
                                            select_additional)
from mbo_epbii.algorithms.srva import ReferenceVectorSet
from mbo_epbii.services.kriging import fit_models

UNIT_BOX = NadirUtopia(nadir=np.ones(2), utopia=np.zeros(2))


def _quarter_circle(labels):
    simplex = sld_vectors(2, 3).vectors
    unit = simplex / np.linalg.norm(simplex, axis=1, keepdims=True)
    return ReferenceVectorSet(unit, np.asarray(labels), "adaptive")


def _table(ref, epbii):
    n = len(ref)
    f_hat = 0.5 * ref.vectors
    X = np.linspace(0.1, 0.9, n)[:, None] * np.ones((1, 3))
    return CandidateTable(X, np.asarray(epbii, dtype=float), f_hat, np.ones(n, dtype=int), ref.labels.copy(),
                          np.zeros(n), np.zeros(n))


def test_correction_is_continuous_at_one():
    np.testing.assert_allclose(correction(np.array([0.0, 0.5, 1.0, 2.0])), [0.0, 0.25, 1.0, 3.0])
    assert correction(np.array([1.0 - 1e-9]))[0] == pytest.approx(correction(np.array([1.0 + 1e-9]))[0])


def test_single_occupied_territory_counts_itself():
    ref = _quarter_circle([0, 0, 1, 1])
    ctx = compute_theta_ref(ref)
    assert niche_counts(np.array([3, 0, 0, 0]), ctx)[0] == pytest.approx(3.0)
    assert niche_count(0, np.array([3, 0, 0, 0]), ctx) == pytest.approx(3.0)


def test_niche_counts_match_direct_summation(rng):
    V = rng.random((10, 3)) + 0.05
    ref = ReferenceVectorSet(V / np.linalg.norm(V, axis=1, keepdims=True), np.zeros(10, dtype=int), "adaptive")
    ctx = compute_theta_ref(ref)
    occupancy = rng.integers(0, 5, size=10)
    counts = niche_counts(occupancy, ctx)
    for i in range(10):
        expected = 0.0
        for j in range(10):
            x = ctx.d_ij[i, j] / ctx.d_min
            h = x ** 2 if x <= 1.0 else 2.0 * x - 1.0
            expected += occupancy[j] / (h + 1.0)
        assert counts[i] == pytest.approx(expected, rel=1e-12)
        assert niche_count(i, occupancy, ctx) == pytest.approx(expected, rel=1e-12)


def test_fitness_examples():
    assert fitness(np.array([0.2]), np.array([2.0]), np.array([1]))[0] == pytest.approx(0.1)
    assert fitness(np.array([0.2]), np.array([2.0]), np.array([2]))[0] == pytest.approx(0.05)
    assert fitness(np.array([0.2]), np.array([0.0]), np.array([1]))[0] == pytest.approx(0.2e12)
    assert fitness(np.array([-0.2]), np.array([1.0]), np.array([1]))[0] < 0.0


def test_initial_niche_state_counts_territory_members():
    ref = _quarter_circle([0, 0, 1, 1])
    ctx = compute_theta_ref(ref)
    state = initial_niche_state(0.5 * ref.vectors[[0, 0, 3]], ref, ctx)
    np.testing.assert_array_equal(state.counts, [2, 0, 0, 1])
    empty = initial_niche_state(np.zeros((0, 2)), ref, ctx)
    np.testing.assert_array_equal(empty.counts, 0)


def test_single_pick_takes_best_fitness_in_first_cluster(rng):
    ref = _quarter_circle([0, 0, 0, 0])
    ctx = compute_theta_ref(ref)
    table = _table(ref, [0.1, 0.4, 0.3, 0.2])
    result = select_additional(table, 1, NicheState(np.zeros(4, dtype=int)), ctx, ref, UNIT_BOX,
                               np.zeros(3), np.ones(3), None, rng)
    np.testing.assert_array_equal(result.indices, [1])
    np.testing.assert_array_equal(result.X, table.X[[1]])
    assert result.jittered == 0


def test_niche_counts_rise_after_each_pick(rng):
    ref = _quarter_circle([0, 0, 1, 1])
    ctx = compute_theta_ref(ref)
    assert ctx.theta_ref == pytest.approx(3.0)
    table = _table(ref, [0.3, 0.1, 0.2, 0.4])
    state = NicheState(np.zeros(4, dtype=int))
    result = select_additional(table, 2, state, ctx, ref, UNIT_BOX, np.zeros(3), np.ones(3), None, rng)
    # the first pick occupies territory 0 only, so candidate 2 (nc 1/4) loses to candidate 3 (nc 1/6)
    np.testing.assert_array_equal(result.indices, [0, 3])
    np.testing.assert_allclose(table.nc, [1.0, 1.0 / 2.0, 1.0 / 4.0, 1.0 / 6.0])
    np.testing.assert_array_equal(state.counts, [1, 0, 0, 1])
    assert result.fitness[1] == pytest.approx(0.4 * 6.0)


def test_fitness_ordering_ignores_epbii_scale(rng):
    ref = _quarter_circle([0, 1, 0, 1])
    ctx = compute_theta_ref(ref)
    epbii = np.array([0.05, 0.2, 0.3, 0.1])
    a = select_additional(_table(ref, epbii), 2, NicheState(np.array([1, 0, 2, 0])), ctx, ref, UNIT_BOX,
                          np.zeros(3), np.ones(3), None, rng)
    b = select_additional(_table(ref, 7.0 * epbii), 2, NicheState(np.array([1, 0, 2, 0])), ctx, ref, UNIT_BOX,
                          np.zeros(3), np.ones(3), None, rng)
    np.testing.assert_array_equal(a.indices, b.indices)


def test_duplicate_designs_are_jittered(rng, caplog):
    ref = _quarter_circle([0, 0, 0, 0])
    ctx = compute_theta_ref(ref)
    table = _table(ref, [0.4, 0.1, 0.1, 0.1])
    result = select_additional(table, 1, NicheState(np.zeros(4, dtype=int)), ctx, ref, UNIT_BOX,
                               np.zeros(3), np.ones(3), table.X[:1].copy(), rng)
    assert result.jittered == 1
    assert not np.array_equal(result.X[0], table.X[0])
    assert np.all(np.abs(result.X[0] - table.X[0]) <= 1e-6)
    assert np.all((result.X[0] >= 0.0) & (result.X[0] <= 1.0))
    assert "jittered" in caplog.text


def test_missing_cluster_is_a_programming_error(rng):
    ref = _quarter_circle([0, 0, 0, 0])
    ctx = compute_theta_ref(ref)
    with pytest.raises(AssertionError):
        select_additional(_table(ref, [0.1] * 4), 2, NicheState(np.zeros(4, dtype=int)), ctx, ref, UNIT_BOX,
                          np.zeros(3), np.ones(3), None, rng)


def test_no_picks_give_empty_result(rng):
    ref = _quarter_circle([0, 0, 0, 0])
    result = select_additional(_table(ref, [0.1] * 4), 0, NicheState(np.zeros(4, dtype=int)),
                               compute_theta_ref(ref), ref, UNIT_BOX, np.zeros(3), np.ones(3), None, rng)
    assert result.X.shape == (0, 3)
    assert result.indices.size == 0


def test_candidate_table_ranks_surrogate_means(rng, fast_likelihood_ga):
    X = rng.random((8, 2))
    F = np.column_stack([X[:, 0], 1.0 - X[:, 0] + X[:, 1]])
    models = fit_models(X, F, fast_likelihood_ga, seeds=[0, 1])
    table = build_candidate_table(X[:4], np.ones(4), models, np.array([0, 1, 0, 1]))
    assert table.f_hat.shape == (4, 2)
    assert len(table) == 4
    assert np.all(table.rank >= 1)


def _replay(table, counts, ref, ctx):
    """Step-by-step re-enactment of niche counting, fitness and territory updates."""
    V = ref.vectors
    projected = V / V.sum(axis=1, keepdims=True)
    counts = list(counts)
    picks = []
    for cluster in range(10):
        best, best_fit = None, -np.inf
        for i in range(len(V)):
            if table.labels[i] != cluster:
                continue
            nc = 0.0
            for j in range(len(V)):
                x = np.linalg.norm(projected[i] - projected[j]) / ctx.d_min
                h = x ** 2 if x <= 1.0 else 2.0 * x - 1.0
                nc += counts[j] / (h + 1.0)
            value = table.epbii[i] / (max(nc, 1e-12) * table.rank[i])
            if value > best_fit:
                best, best_fit = i, value
        picks.append(best)
        for j in range(len(V)):
            if territory(table.f_hat[best], V[j], ctx.theta_ref) >= 0.0:
                counts[j] += 1
    return picks, counts


def test_ten_picks_match_scripted_replay(rng):
    simplex = sld_vectors(3, 12).vectors
    ref = ReferenceVectorSet(simplex / np.linalg.norm(simplex, axis=1, keepdims=True),
                             rng.permutation(np.arange(91) % 10), "adaptive")
    ctx = compute_theta_ref(ref)
    f_hat = rng.random((91, 3))
    table = CandidateTable(rng.random((91, 4)), rng.uniform(0.01, 1.0, size=91), f_hat,
                           nondominated_sort(f_hat), ref.labels.copy(), np.zeros(91), np.zeros(91))
    start = rng.integers(0, 3, size=91)
    expected_picks, expected_counts = _replay(table, start, ref, ctx)
    state = NicheState(start.copy())
    result = select_additional(table, 10, state, ctx, ref, NadirUtopia(nadir=np.ones(3), utopia=np.zeros(3)),
                               np.zeros(4), np.ones(4), None, rng)
    assert result.indices.tolist() == expected_picks
    np.testing.assert_array_equal(state.counts, expected_counts)
    assert sorted(ref.labels[result.indices].tolist()) == list(range(10))
    assert np.all(state.counts >= start)
