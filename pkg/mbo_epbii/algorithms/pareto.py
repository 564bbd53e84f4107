"""
Pareto tooling: non-dominated sorting, weak-front elimination by epsilon
dominance, nadir/utopia estimation, normalization and simplex lattice designs.
All objectives are minimized.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from ..core.config import sld_count
from ..core.exceptions import InputDomainError

logger = logging.getLogger(__name__)


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """D[i, j] is True iff point i dominates point j."""
    F = np.asarray(F, dtype=float)
    less_equal = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    strictly_less = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return less_equal & strictly_less


def nondominated_sort(F: np.ndarray) -> np.ndarray:
    """Pareto rank per point, 1 for the non-dominated layer."""
    F = np.asarray(F, dtype=float)
    if F.size == 0:
        return np.zeros(0, dtype=int)
    F = np.atleast_2d(F)
    dominated_by = dominance_matrix(F)
    counts = dominated_by.sum(axis=0)
    ranks = np.zeros(F.shape[0], dtype=int)
    current = np.flatnonzero(counts == 0)
    rank = 1
    while current.size:
        ranks[current] = rank
        counts = counts - dominated_by[current].sum(axis=0)
        counts[ranks > 0] = -1
        current = np.flatnonzero(counts == 0)
        rank += 1
    return ranks


def nondominated_mask(F: np.ndarray) -> np.ndarray:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return ~np.any(dominance_matrix(F), axis=0)


def weakly_nondominated_mask(F: np.ndarray) -> np.ndarray:
    """True for points no other point beats strictly in every objective.

    Keeps weak Pareto optima, which the epsilon filter removes later.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    strictly_better = np.all(F[:, None, :] < F[None, :, :], axis=2)
    return ~np.any(strictly_better, axis=0)


def _tentative_scale(F: np.ndarray):
    f_min = F.min(axis=0)
    span = F.max(axis=0) - f_min
    span = np.where(span > 0, span, 1.0)
    return f_min, span


def epsilon_dominance_mask(F: np.ndarray, eps: float) -> np.ndarray:
    """Survivors of one insertion-order sweep of epsilon-dominance elimination.

    Objectives are tentatively normalized by their min/max over F. A point is
    dropped when another surviving point, shifted down by eps in every
    objective, dominates it.
    """
    if eps <= 0:
        raise InputDomainError(f"eps must be positive, got {eps}")
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n = F.shape[0]
    keep = np.ones(n, dtype=bool)
    if n <= 1:
        return keep
    f_min, span = _tentative_scale(F)
    Z = (F - f_min) / span
    shifted = Z - eps
    for i in range(n):
        others = keep.copy()
        others[i] = False
        if not others.any():
            break
        S = shifted[others]
        dominated = np.all(S <= Z[i], axis=1) & np.any(S < Z[i], axis=1)
        if dominated.any():
            keep[i] = False
    return keep


def epsilon_dominance_filter(F: np.ndarray, eps: float) -> np.ndarray:
    """Weak-front elimination; returns the surviving points in original units."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    return F[epsilon_dominance_mask(F, eps)]


@dataclass(frozen=True)
class NadirUtopia:
    """Estimated worst (nadir) and best (utopia) objective values."""

    nadir: np.ndarray
    utopia: np.ndarray

    def __post_init__(self):
        nadir = np.asarray(self.nadir, dtype=float).copy()
        utopia = np.asarray(self.utopia, dtype=float).copy()
        if nadir.shape != utopia.shape or np.any(nadir <= utopia):
            raise InputDomainError("nadir must exceed utopia componentwise")
        nadir.setflags(write=False)
        utopia.setflags(write=False)
        object.__setattr__(self, "nadir", nadir)
        object.__setattr__(self, "utopia", utopia)

    @property
    def scale(self) -> np.ndarray:
        return self.nadir - self.utopia

    def normalize(self, F: np.ndarray) -> np.ndarray:
        return (np.asarray(F, dtype=float) - self.utopia) / self.scale

    def denormalize(self, Z: np.ndarray) -> np.ndarray:
        return self.utopia + np.asarray(Z, dtype=float) * self.scale

    def to_dict(self) -> dict:
        return {"nadir": self.nadir.tolist(), "utopia": self.utopia.tolist()}


def estimate_nadir_utopia(filtered: np.ndarray, eps: float,
                          fallback_range: Optional[np.ndarray] = None,
                          front: Optional[np.ndarray] = None) -> NadirUtopia:
    """Nadir/utopia from the epsilon-filtered front, widened by eps.

    The tentative normalization uses the per-objective min/max of `front`,
    the full estimated front including its weak members (the filtered set
    itself when omitted). In that space nadir = max + eps and utopia = min - eps
    over the filtered points. An objective with a zero span is scaled by
    `fallback_range` (the sample archive's range), or 1.0 when that is
    degenerate too.
    """
    filtered = np.atleast_2d(np.asarray(filtered, dtype=float))
    if filtered.shape[0] == 0:
        raise InputDomainError("cannot estimate nadir/utopia from an empty set")
    scale_from = filtered if front is None else np.atleast_2d(np.asarray(front, dtype=float))
    if scale_from.shape[1] != filtered.shape[1]:
        raise InputDomainError(f"front has {scale_from.shape[1]} objectives, filtered set has {filtered.shape[1]}")
    f_min = filtered.min(axis=0)
    f_max = filtered.max(axis=0)
    span = scale_from.max(axis=0) - scale_from.min(axis=0)
    degenerate = ~(span > 0)
    if degenerate.any():
        fallback = np.ones_like(span) if fallback_range is None else np.asarray(fallback_range, dtype=float)
        fallback = np.where(fallback > 0, fallback, 1.0)
        span = np.where(degenerate, fallback, span)
        logger.warning(f"Degenerate objective range in estimated front for objectives {np.flatnonzero(degenerate).tolist()}")
    return NadirUtopia(nadir=f_max + eps * span, utopia=f_min - eps * span)


def normalize(F: np.ndarray, nu: NadirUtopia) -> np.ndarray:
    """(f - utopia) / (nadir - utopia) componentwise."""
    return nu.normalize(F)


def denormalize(Z: np.ndarray, nu: NadirUtopia) -> np.ndarray:
    return nu.denormalize(Z)


@dataclass(frozen=True)
class SLDVectorSet:
    """Simplex-lattice vectors (components >= 0, rows sum to one)."""

    vectors: np.ndarray
    h1: int
    h2: int = 0

    def __len__(self) -> int:
        return self.vectors.shape[0]


def _lattice(n_obj: int, h: int) -> np.ndarray:
    # stars-and-bars: choose M-1 bar positions among h+M-1 slots
    bars = np.array(list(combinations(range(h + n_obj - 1), n_obj - 1)), dtype=int)
    bars = bars.reshape(-1, n_obj - 1)
    padded = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), h + n_obj - 1)])
    return (np.diff(padded, axis=1) - 1) / float(h)


def sld_vectors(n_obj: int, h: int) -> SLDVectorSet:
    """All vectors with components in {0, 1/h, ..., 1} summing to one."""
    if h < 1 or n_obj < 2:
        raise InputDomainError(f"SLD needs M >= 2 and H >= 1, got M={n_obj}, H={h}")
    return SLDVectorSet(_lattice(n_obj, h), h, 0)


def two_layer_sld(n_obj: int, h1: int, h2: int) -> SLDVectorSet:
    """Outer lattice H1 plus an inner lattice H2 shrunk halfway toward the centroid."""
    outer = sld_vectors(n_obj, h1).vectors
    if h2 < 0:
        raise InputDomainError(f"H2 must be non-negative, got {h2}")
    if h2 == 0:
        vectors = outer
    else:
        inner = (_lattice(n_obj, h2) + 1.0 / n_obj) / 2.0
        vectors = np.vstack([outer, inner])
    assert vectors.shape[0] == sld_count(n_obj, h1, h2)
    return SLDVectorSet(vectors, h1, h2)
