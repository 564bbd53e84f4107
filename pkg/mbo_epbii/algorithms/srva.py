"""
Surrogate-assisted reference vector adaptation.

Reference vectors are taken from the estimated front: a greedy max-min pick
pushes them away from the already sampled region, k-means groups them into
one cluster per additional sample and every pick becomes a unit direction.
The two-layer simplex-lattice set is the non-adaptive alternative.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans

from ..core.exceptions import InputDomainError
from ..core.utils import rng_to_int
from .pareto import two_layer_sld

logger = logging.getLogger(__name__)

ZERO_NORM = 1e-9


@dataclass(frozen=True)
class ReferenceVectorSet:
    """Unit reference vectors with one cluster label (0-based) per vector."""

    vectors: np.ndarray
    labels: np.ndarray
    source: Literal["adaptive", "sld"]

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float)).copy()
        labels = np.asarray(self.labels, dtype=int).reshape(-1).copy()
        if labels.shape[0] != vectors.shape[0]:
            raise InputDomainError("one cluster label per reference vector is required")
        vectors.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_obj(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass(frozen=True)
class ReferenceSelection:
    points: np.ndarray  # normalized objective vectors, in pick order
    indices: np.ndarray  # rows of the estimated front
    min_distances: np.ndarray  # max-min distance at each pick


def select_reference_solutions(front_norm: np.ndarray, samples_norm: Optional[np.ndarray],
                               n_ref: int) -> ReferenceSelection:
    """Greedy max-min selection of `n_ref` points from the normalized estimated front.

    Each pick maximizes the minimum distance to the samples and to the points
    already picked; ties go to the lowest index. A front smaller than `n_ref`
    is padded by cycling through the picks.
    """
    front_norm = np.atleast_2d(np.asarray(front_norm, dtype=float))
    if front_norm.shape[0] == 0 or front_norm.size == 0:
        raise InputDomainError("estimated front is empty")
    if n_ref < 1:
        raise InputDomainError(f"n_ref must be positive, got {n_ref}")
    n_cand = front_norm.shape[0]
    if samples_norm is None or np.asarray(samples_norm).size == 0:
        nearest = np.full(n_cand, np.inf)
    else:
        nearest = cdist(front_norm, np.atleast_2d(samples_norm)).min(axis=1)
    available = np.ones(n_cand, dtype=bool)
    picks, gaps = [], []
    for _ in range(min(n_ref, n_cand)):
        masked = np.where(available, nearest, -np.inf)
        best = int(np.argmax(masked))
        picks.append(best)
        gaps.append(float(nearest[best]))
        available[best] = False
        nearest = np.minimum(nearest, np.linalg.norm(front_norm - front_norm[best], axis=1))
    if n_cand < n_ref:
        logger.warning(f"Estimated front has {n_cand} points for {n_ref} reference vectors; cycling picks")
        cycled = [picks[k % n_cand] for k in range(n_cand, n_ref)]
        picks.extend(cycled)
        gaps.extend([0.0] * len(cycled))
    indices = np.array(picks, dtype=int)
    return ReferenceSelection(front_norm[indices], indices, np.array(gaps))


def _repair_empty_clusters(points: np.ndarray, labels: np.ndarray, centers: np.ndarray,
                           n_clusters: int) -> np.ndarray:
    labels = labels.copy()
    for c in range(n_clusters):
        if np.any(labels == c):
            continue
        counts = np.bincount(labels, minlength=n_clusters)
        movable = counts[labels] > 1
        # farthest movable point from its own centroid seeds the empty cluster
        spread = np.linalg.norm(points - centers[labels], axis=1)
        spread[~movable] = -np.inf
        labels[int(np.argmax(spread))] = c
    return labels


def cluster_reference_solutions(points_norm: np.ndarray, n_add: int,
                                rng: np.random.Generator) -> np.ndarray:
    """Label every selected point with one of `n_add` k-means clusters.

    Centroids come from the points inside the normalized unit hypercube; the
    rest are assigned to the nearest centroid. With fewer inside points than
    clusters all points take part in the fit.
    """
    points_norm = np.atleast_2d(np.asarray(points_norm, dtype=float))
    n = points_norm.shape[0]
    if n_add < 1:
        raise InputDomainError(f"n_add must be positive, got {n_add}")
    if n < n_add:
        raise InputDomainError(f"cannot form {n_add} clusters from {n} points")
    if n_add == 1:
        return np.zeros(n, dtype=int)
    inside = np.all((points_norm >= 0.0) & (points_norm <= 1.0), axis=1)
    fit_on = points_norm[inside]
    if fit_on.shape[0] < n_add:
        logger.warning(f"Only {fit_on.shape[0]} selected points inside the nadir/utopia box "
                       f"for {n_add} clusters; clustering all points")
        fit_on = points_norm
    kmeans = KMeans(n_clusters=n_add, init="k-means++", n_init=1, max_iter=100, tol=1e-6,
                    random_state=rng_to_int(rng))
    kmeans.fit(fit_on)
    labels = kmeans.predict(points_norm).astype(int)
    return _repair_empty_clusters(points_norm, labels, kmeans.cluster_centers_, n_add)


def to_unit_vectors(points_norm: np.ndarray, labels: np.ndarray,
                    source: Literal["adaptive", "sld"] = "adaptive") -> ReferenceVectorSet:
    """Scale each point to unit length.

    Negative components are clipped to zero first, so every vector lies in
    the nonnegative orthant. A point that clips to the zero vector becomes the uniform direction.
    """
    V = np.clip(np.atleast_2d(np.asarray(points_norm, dtype=float)), 0.0, None)
    norms = np.linalg.norm(V, axis=1)
    degenerate = norms < ZERO_NORM
    if degenerate.any():
        logger.warning(f"{int(degenerate.sum())} zero-length reference vectors replaced by the uniform direction")
    unit = np.empty_like(V)
    unit[~degenerate] = V[~degenerate] / norms[~degenerate, None]
    unit[degenerate] = 1.0 / np.sqrt(V.shape[1])
    return ReferenceVectorSet(unit, labels, source)


def sld_reference_vectors(n_obj: int, h1: int, h2: int, n_add: int,
                          rng: np.random.Generator) -> ReferenceVectorSet:
    """Two-layer simplex-lattice vectors, clustered the same way as adaptive ones."""
    simplex = two_layer_sld(n_obj, h1, h2).vectors
    labels = cluster_reference_solutions(simplex, n_add, rng)
    return to_unit_vectors(simplex, labels, source="sld")


def adapt_reference_vectors(front_norm: np.ndarray, samples_norm: np.ndarray, n_ref: int,
                            n_add: int, rng: np.random.Generator, sld_h1: int,
                            sld_h2: int = 0) -> ReferenceVectorSet:
    """Adaptive reference vectors, or the simplex-lattice set when the front is empty."""
    front_norm = np.asarray(front_norm, dtype=float)
    if front_norm.size == 0:
        n_obj = np.atleast_2d(samples_norm).shape[1]
        logger.warning("Estimated front is empty; using simplex-lattice reference vectors")
        return sld_reference_vectors(n_obj, sld_h1, sld_h2, n_add, rng)
    selection = select_reference_solutions(front_norm, samples_norm, n_ref)
    labels = cluster_reference_solutions(selection.points, n_add, rng)
    return to_unit_vectors(selection.points, labels, source="adaptive")
