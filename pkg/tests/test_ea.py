import numpy as np
import pytest

from mbo_epbii.algorithms.ea import (moead_neighborhoods, nsga3_population_size, polynomial_mutation,
                                     run_moead_epbii, run_nsga3, run_single_objective_ga, sbx_crossover)
from mbo_epbii.algorithms.pareto import nondominated_mask, sld_vectors
from mbo_epbii.core.config import EAConfig
from mbo_epbii.services.problems import get_problem


def _sphere(X):
    return np.sum(np.asarray(X) ** 2, axis=1)


def _two_objectives(X):
    g = np.sum((X[:, 1:] - 0.5) ** 2, axis=1)
    return np.column_stack([X[:, 0] + g, 1.0 - X[:, 0] + g])


def test_sbx_without_crossover_returns_copies(rng):
    p1, p2 = np.array([0.1, 0.2]), np.array([0.8, 0.9])
    c1, c2 = sbx_crossover(p1, p2, 15.0, 0.0, rng)
    np.testing.assert_array_equal(c1, p1)
    np.testing.assert_array_equal(c2, p2)
    assert c1 is not p1


def test_sbx_children_preserve_parent_mean(rng):
    p1, p2 = np.array([0.3, 0.4, 0.5]), np.array([0.6, 0.5, 0.45])
    for _ in range(20):
        c1, c2 = sbx_crossover(p1, p2, 15.0, 1.0, rng)
        np.testing.assert_allclose(c1 + c2, p1 + p2, atol=1e-12)


def test_operators_respect_bounds(rng):
    lower, upper = np.zeros(4), np.ones(4)
    for _ in range(50):
        p1, p2 = rng.random(4), rng.random(4)
        c1, c2 = sbx_crossover(p1, p2, 2.0, 1.0, rng, lower, upper)
        mutated = polynomial_mutation(c1, 5.0, 1.0, rng, lower, upper)
        for child in (c1, c2, mutated):
            assert np.all((child >= lower) & (child <= upper))


def test_mutation_with_zero_probability_is_identity(rng):
    x = np.array([0.25, 0.75])
    np.testing.assert_array_equal(polynomial_mutation(x, 20.0, 0.0, rng, np.zeros(2), np.ones(2)), x)


def test_single_objective_ga_improves_on_initial_population():
    lower, upper = -np.ones(3), np.ones(3)
    start = run_single_objective_ga(_sphere, lower, upper, EAConfig(population_size=20, generations=0),
                                    np.random.default_rng(4))
    best = run_single_objective_ga(_sphere, lower, upper, EAConfig(population_size=20, generations=50),
                                   np.random.default_rng(4))
    assert best.fitness <= start.fitness
    assert best.fitness < 0.1
    assert best.fitness == pytest.approx(_sphere(best.genes[None, :])[0])


def test_single_objective_ga_uses_initial_designs(rng):
    best = run_single_objective_ga(_sphere, -np.ones(2), np.ones(2), EAConfig(population_size=6, generations=0),
                                   rng, initial=np.zeros((1, 2)))
    np.testing.assert_array_equal(best.genes, [0.0, 0.0])
    assert best.fitness == 0.0


def test_nsga3_population_sizes():
    assert nsga3_population_size(91) == 92
    assert nsga3_population_size(496) == 496
    assert nsga3_population_size(714) == 716


def test_nsga3_returns_nondominated_members(rng):
    ref_dirs = sld_vectors(2, 11).vectors
    X, F = run_nsga3(_two_objectives, np.zeros(3), np.ones(3), ref_dirs, EAConfig(generations=10), rng)
    assert X.shape[0] == F.shape[0] >= 1
    assert X.shape[1] == 3
    assert np.all(nondominated_mask(F))
    np.testing.assert_allclose(F, _two_objectives(X))
    assert np.all((X >= 0.0) & (X <= 1.0))


def test_nsga3_is_reproducible():
    ref_dirs = sld_vectors(2, 7).vectors
    cfg = EAConfig(generations=5)
    a = run_nsga3(_two_objectives, np.zeros(3), np.ones(3), ref_dirs, cfg, np.random.default_rng(9))
    b = run_nsga3(_two_objectives, np.zeros(3), np.ones(3), ref_dirs, cfg, np.random.default_rng(9))
    np.testing.assert_array_equal(a[0], b[0])


def test_moead_neighborhoods_start_with_self():
    vectors = sld_vectors(2, 9).vectors
    neighbors = moead_neighborhoods(vectors)
    assert neighbors.shape == (10, 2)
    np.testing.assert_array_equal(neighbors[:, 0], np.arange(10))
    assert moead_neighborhoods(vectors, 4).shape == (10, 4)


def _target_score(targets):
    def score(X, idx):
        return -np.sum((X - targets[idx]) ** 2, axis=1)
    return score


def test_moead_without_generations_returns_seeds(rng):
    vectors = sld_vectors(2, 4).vectors
    targets = vectors.copy()
    init = rng.random((5, 2))
    X, values = run_moead_epbii(_target_score(targets), init, vectors, np.zeros(2), np.ones(2),
                                EAConfig(generations=0), rng)
    np.testing.assert_array_equal(X, init)
    np.testing.assert_allclose(values, _target_score(targets)(init, np.arange(5)))


def test_moead_never_loses_a_subproblem_value(rng):
    vectors = sld_vectors(2, 9).vectors
    targets = vectors.copy()
    score = _target_score(targets)
    init = rng.random((10, 2))
    start = score(init, np.arange(10))
    X, values = run_moead_epbii(score, init, vectors, np.zeros(2), np.ones(2), EAConfig(generations=20), rng)
    assert np.all(values >= start)
    np.testing.assert_allclose(values, score(X, np.arange(10)))
    assert values.sum() > start.sum()


def test_moead_requires_one_individual_per_vector(rng):
    vectors = sld_vectors(2, 4).vectors
    with pytest.raises(ValueError):
        run_moead_epbii(_target_score(vectors), rng.random((3, 2)), vectors, np.zeros(2), np.ones(2),
                        EAConfig(generations=1), rng)


def test_nsga3_converges_on_analytic_dtlz2():
    problem = get_problem("dtlz2", 3)
    ref_dirs = sld_vectors(3, 30).vectors
    X, F = run_nsga3(problem.evaluate_batch, problem.lower, problem.upper, ref_dirs,
                     EAConfig(generations=200), np.random.default_rng(0))
    on_sphere = np.abs(np.linalg.norm(F, axis=1) - 1.0) <= 0.05
    assert on_sphere.mean() >= 0.9


def _peak_score(targets):
    def score(X, idx):
        return np.exp(-np.sum((X - targets[idx]) ** 2, axis=1))
    return score


def test_moead_matches_exhaustive_random_search(rng):
    vectors = sld_vectors(2, 4).vectors
    targets = np.array([[0.1, 0.8], [0.3, 0.3], [0.5, 0.9], [0.7, 0.2], [0.9, 0.6]])
    score = _peak_score(targets)
    X, values = run_moead_epbii(score, rng.random((5, 2)), vectors, np.zeros(2), np.ones(2),
                                EAConfig(generations=200), np.random.default_rng(2))
    samples = np.random.default_rng(3).random((1_000_000, 2))
    exhaustive = np.array([score(samples, np.full(samples.shape[0], i)).max() for i in range(5)])
    assert np.sum(values >= 0.95 * exhaustive) >= 4
