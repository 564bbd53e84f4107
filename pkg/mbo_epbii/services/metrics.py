"""
Quality indicators: hypervolume, IGD+ and IGD, plus per-seed summaries.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..core.config import IndicatorConfig
from ..core.exceptions import InputDomainError
from ..core.utils import format_number

logger = logging.getLogger(__name__)

# reference points per (front shape, M); DTLZ3/4 share DTLZ2's sphere, DTLZ6 DTLZ5's curve
_HV_REFERENCE = {
    "dtlz1": {3: 150.0, 6: 50.0},
    "dtlz2": {3: 1.1, 6: 1.1},
    "dtlz5": {3: 1.1, 6: 1.1},
}
_FRONT_FAMILY = {"dtlz1": "dtlz1", "dtlz2": "dtlz2", "dtlz3": "dtlz2", "dtlz4": "dtlz2",
                 "dtlz5": "dtlz5", "dtlz6": "dtlz5", "dtlz7": "dtlz7"}

_REFERENCE_COUNT = {
    "dtlz1": {3: 1326, 6: 8568},
    "dtlz2": {3: 1326, 6: 8568},
    "dtlz5": {3: 2000, 6: 8000},
    "dtlz7": {3: 2401, 6: 7776},
}


def default_hv_reference(problem: str, n_obj: int) -> np.ndarray:
    """Hypervolume reference point used for the benchmark family."""
    family = _FRONT_FAMILY.get(problem.lower())
    if family is None:
        raise InputDomainError(f"no default hypervolume reference for {problem}")
    if family == "dtlz7":
        return np.array([1.1] * (n_obj - 1) + [2.0 * n_obj + 0.1])
    value = _HV_REFERENCE[family].get(n_obj, _HV_REFERENCE[family][3])
    return np.full(n_obj, value)


def default_reference_count(problem: str, n_obj: int) -> int:
    """Size of the IGD+ reference cloud for the benchmark family."""
    family = _FRONT_FAMILY.get(problem.lower())
    if family is None:
        raise InputDomainError(f"no default reference-set size for {problem}")
    return _REFERENCE_COUNT[family].get(n_obj, 5000)


def _relevant_points(points: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Points strictly dominating the reference point, reduced to their non-dominated subset."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0 or points.shape[1] == 0:
        return points.reshape(0, ref.shape[0])
    points = points[np.all(points < ref, axis=1)]
    if points.shape[0] <= 1:
        return points
    points = np.unique(points, axis=0)
    weakly = np.all(points[:, None, :] <= points[None, :, :], axis=2)
    np.fill_diagonal(weakly, False)
    return points[~np.any(weakly, axis=0)]


def _hv_2d(points: np.ndarray, ref: np.ndarray) -> float:
    order = np.argsort(points[:, 0], kind="stable")
    p = points[order]
    # running minimum of f2 along increasing f1 gives the staircase
    f2 = np.minimum.accumulate(p[:, 1])
    widths = np.diff(np.append(p[:, 0], ref[0]))
    return float(np.sum(widths * (ref[1] - f2)))


def _hv_sweep(points: np.ndarray, ref: np.ndarray) -> float:
    n_obj = points.shape[1]
    if points.shape[0] == 0:
        return 0.0
    if n_obj == 1:
        return float(ref[0] - points[:, 0].min())
    if n_obj == 2:
        return _hv_2d(points, ref)
    order = np.argsort(points[:, -1], kind="stable")
    points = points[order]
    levels = np.append(points[:, -1], ref[-1])
    volume = 0.0
    for k in range(points.shape[0]):
        depth = levels[k + 1] - levels[k]
        if depth <= 0:
            continue
        volume += depth * _hv_sweep(_relevant_points(points[: k + 1, :-1], ref[:-1]), ref[:-1])
    return volume


def hypervolume_exact(points: np.ndarray, ref: np.ndarray) -> float:
    """Exact hypervolume by slicing along the last objective."""
    ref = np.asarray(ref, dtype=float)
    return _hv_sweep(_relevant_points(points, ref), ref)


def hypervolume_monte_carlo(points: np.ndarray, ref: np.ndarray, samples: int = 1_000_000,
                            rng: Optional[np.random.Generator] = None,
                            lower: Optional[np.ndarray] = None,
                            chunk: int = 100_000) -> Tuple[float, float]:
    """Monte Carlo hypervolume estimate and its standard error.

    Samples are drawn uniformly in the box [lower, ref]; `lower` defaults to
    the componentwise minimum of the points. Keeping `lower` and the seed fixed
    across calls makes estimates of growing sets nondecreasing.
    """
    ref = np.asarray(ref, dtype=float)
    pts = _relevant_points(points, ref)
    if pts.shape[0] == 0:
        return 0.0, 0.0
    rng = rng if rng is not None else np.random.default_rng(0)
    low = pts.min(axis=0) if lower is None else np.minimum(np.asarray(lower, dtype=float), ref)
    box = float(np.prod(ref - low))
    hits = 0
    drawn = 0
    while drawn < samples:
        size = min(chunk, samples - drawn)
        u = low + rng.random((size, ref.shape[0])) * (ref - low)
        dominated = np.zeros(size, dtype=bool)
        for p in pts:
            dominated |= np.all(u >= p, axis=1)
        hits += int(dominated.sum())
        drawn += size
    fraction = hits / samples
    stderr = box * np.sqrt(fraction * (1.0 - fraction) / samples)
    return box * fraction, float(stderr)


def hypervolume(points: np.ndarray, ref: np.ndarray, method: str = "auto", samples: int = 1_000_000,
                rng: Optional[np.random.Generator] = None, exact_max_objectives: int = 4,
                lower: Optional[np.ndarray] = None) -> float:
    """Hypervolume of a minimization set with respect to `ref`.

    method "auto" uses the exact sweep up to `exact_max_objectives` objectives
    and Monte Carlo beyond.
    """
    ref = np.asarray(ref, dtype=float)
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return 0.0
    points = np.atleast_2d(points)
    if points.shape[1] != ref.shape[0]:
        raise InputDomainError(f"reference point has {ref.shape[0]} components, points have {points.shape[1]}")
    if method == "exact" or (method == "auto" and ref.shape[0] <= exact_max_objectives):
        return hypervolume_exact(points, ref)
    if method in ("auto", "monte-carlo"):
        value, _ = hypervolume_monte_carlo(points, ref, samples, rng, lower)
        return value
    raise InputDomainError(f"unknown hypervolume method {method!r}")


def hypervolume_with_config(points: np.ndarray, ref: np.ndarray, cfg: IndicatorConfig,
                            lower: Optional[np.ndarray] = None) -> float:
    return hypervolume(points, ref, cfg.hv_method, cfg.hv_mc_samples,
                       np.random.default_rng(cfg.hv_mc_seed), cfg.exact_max_objectives, lower)


def igd_plus(points: np.ndarray, refs: np.ndarray) -> float:
    """Mean over reference points z of min over points a of ||max(a - z, 0)||."""
    refs = np.atleast_2d(np.asarray(refs, dtype=float))
    if refs.shape[0] == 0:
        raise InputDomainError("IGD+ needs a nonempty reference set")
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return float("inf")
    points = np.atleast_2d(points)
    best = np.full(refs.shape[0], np.inf)
    for a in points:
        d = np.sqrt(np.sum(np.maximum(a - refs, 0.0) ** 2, axis=1))
        np.minimum(best, d, out=best)
    return float(np.mean(best))


def igd(points: np.ndarray, refs: np.ndarray) -> float:
    """Mean over reference points of the Euclidean distance to the nearest point."""
    refs = np.atleast_2d(np.asarray(refs, dtype=float))
    if refs.shape[0] == 0:
        raise InputDomainError("IGD needs a nonempty reference set")
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return float("inf")
    return float(np.mean(cdist(refs, np.atleast_2d(points)).min(axis=1)))


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    min: float
    max: float

    def to_row(self) -> list:
        return [format_number(v) for v in (self.mean, self.std, self.min, self.max)]


def summarize(values: Sequence[float]) -> Summary:
    """mean, sample standard deviation (n-1), min and max."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise InputDomainError("summarize needs at least one value")
    if values.size == 1:
        logger.warning("Only one value to summarize; reporting std = 0")
        std = 0.0
    else:
        std = float(np.std(values, ddof=1))
    return Summary(float(np.mean(values)), std, float(values.min()), float(values.max()))
