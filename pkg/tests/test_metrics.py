import logging
from itertools import combinations

import numpy as np
import pytest

from mbo_epbii.core.config import IndicatorConfig
from mbo_epbii.core.exceptions import InputDomainError
from mbo_epbii.services.metrics import (default_hv_reference, default_reference_count, hypervolume,
                                        hypervolume_exact, hypervolume_monte_carlo, hypervolume_with_config, igd,
                                        igd_plus, summarize)


def _inclusion_exclusion(points, ref):
    points = [p for p in points if np.all(p < ref)]
    total = 0.0
    for size in range(1, len(points) + 1):
        for subset in combinations(points, size):
            corner = np.max(subset, axis=0)
            total += (-1) ** (size + 1) * np.prod(ref - corner)
    return total


def test_single_box():
    assert hypervolume(np.array([[0.5, 0.5, 0.5]]), np.full(3, 1.1)) == pytest.approx(0.216)


def test_two_dimensional_staircase():
    assert hypervolume_exact(np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([3.0, 3.0])) == pytest.approx(3.0)


def test_dominated_and_outside_points_change_nothing():
    ref = np.full(3, 1.1)
    base = np.array([[0.2, 0.6, 0.9], [0.7, 0.1, 0.5]])
    value = hypervolume_exact(base, ref)
    extra = np.vstack([base, [[0.8, 0.7, 1.0]], [[0.1, 0.1, 1.2]], base[:1]])
    assert hypervolume_exact(extra, ref) == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize("n_obj", [3, 4, 5])
def test_exact_matches_inclusion_exclusion(rng, n_obj):
    for _ in range(5):
        points = rng.random((7, n_obj))
        ref = np.full(n_obj, 1.1)
        assert hypervolume_exact(points, ref) == pytest.approx(_inclusion_exclusion(points, ref), rel=1e-10)


def test_monte_carlo_agrees_with_exact(rng):
    points = rng.random((10, 3))
    ref = np.full(3, 1.1)
    exact = hypervolume_exact(points, ref)
    estimate, stderr = hypervolume_monte_carlo(points, ref, 1_000_000, np.random.default_rng(1))
    assert stderr > 0.0
    assert abs(estimate - exact) <= 4.0 * stderr
    assert abs(estimate - exact) <= 0.005 * exact


def test_many_objectives_use_monte_carlo(rng):
    points = rng.random((6, 5))
    ref = np.full(5, 1.1)
    exact = _inclusion_exclusion(points, ref)
    estimate, stderr = hypervolume_monte_carlo(points, ref, 200_000, np.random.default_rng(2))
    assert abs(estimate - exact) <= 4.0 * stderr
    auto = hypervolume(points, ref, samples=200_000, rng=np.random.default_rng(2))
    assert auto == pytest.approx(estimate)
    assert hypervolume(points, ref, method="exact") == pytest.approx(exact, rel=1e-10)


def test_monte_carlo_is_monotone_with_fixed_box(rng):
    ref = np.full(4, 1.1)
    points = rng.random((12, 4))
    values = [hypervolume(points[:k], ref, method="monte-carlo", samples=50_000,
                          rng=np.random.default_rng(5), lower=np.zeros(4)) for k in range(1, 13)]
    assert np.all(np.diff(values) >= 0.0)


def test_hypervolume_edge_cases():
    ref = np.full(2, 1.0)
    assert hypervolume(np.zeros((0, 2)), ref) == 0.0
    assert hypervolume(np.array([[2.0, 0.0]]), ref) == 0.0
    assert hypervolume_monte_carlo(np.array([[2.0, 2.0]]), ref) == (0.0, 0.0)
    with pytest.raises(InputDomainError):
        hypervolume(np.array([[0.5, 0.5, 0.5]]), ref)
    with pytest.raises(InputDomainError):
        hypervolume(np.array([[0.5, 0.5]]), ref, method="grid")


def test_hypervolume_with_config():
    cfg = IndicatorConfig(hv_method="exact")
    assert hypervolume_with_config(np.array([[0.5, 0.5, 0.5]]), np.full(3, 1.1), cfg) == pytest.approx(0.216)


def test_igd_plus_examples():
    assert igd_plus(np.array([[1.0, 1.0]]), np.array([[0.0, 0.0]])) == pytest.approx(np.sqrt(2.0))
    assert igd_plus(np.array([[-1.0, 1.0]]), np.array([[0.0, 0.0]])) == pytest.approx(1.0)
    refs = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert igd_plus(refs, refs) == 0.0


def test_igd_plus_never_exceeds_igd(rng):
    for _ in range(10):
        points = rng.random((15, 3))
        refs = rng.random((40, 3))
        assert igd_plus(points, refs) <= igd(points, refs) + 1e-12


def test_distance_edge_cases():
    refs = np.array([[0.0, 1.0]])
    assert igd_plus(np.zeros((0, 2)), refs) == float("inf")
    assert igd(np.zeros((0, 2)), refs) == float("inf")
    with pytest.raises(InputDomainError):
        igd_plus(np.array([[0.0, 1.0]]), np.zeros((0, 2)))
    with pytest.raises(InputDomainError):
        igd(np.array([[0.0, 1.0]]), np.zeros((0, 2)))


def test_summarize(caplog):
    s = summarize([1.0, 2.0, 3.0])
    assert (s.mean, s.std, s.min, s.max) == pytest.approx((2.0, 1.0, 1.0, 3.0))
    assert s.to_row() == ["2.0", "1.0", "1.0", "3.0"]
    with caplog.at_level(logging.WARNING):
        single = summarize([0.7])
    assert (single.mean, single.std, single.min, single.max) == (0.7, 0.0, 0.7, 0.7)
    assert "Only one value" in caplog.text
    with pytest.raises(InputDomainError):
        summarize([])


def test_default_references():
    np.testing.assert_allclose(default_hv_reference("dtlz1", 3), np.full(3, 150.0))
    np.testing.assert_allclose(default_hv_reference("dtlz1", 6), np.full(6, 50.0))
    np.testing.assert_allclose(default_hv_reference("DTLZ4", 6), np.full(6, 1.1))
    np.testing.assert_allclose(default_hv_reference("dtlz7", 3), [1.1, 1.1, 6.1])
    assert default_reference_count("dtlz2", 3) == 1326
    assert default_reference_count("dtlz6", 6) == 8000
    assert default_reference_count("dtlz7", 6) == 7776
    assert default_reference_count("dtlz2", 4) == 5000
    with pytest.raises(InputDomainError):
        default_hv_reference("zdt1", 2)
