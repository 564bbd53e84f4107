"""
Additional-sample selection: EPBII values are turned into fitness through
niche counts and Pareto ranks, then one candidate is taken per cluster while
the territory occupancy is updated after every pick.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..services.kriging import KrigingModel, predict_means
from .epbii import TerritoryContext, territory_matrix
from .pareto import NadirUtopia, nondominated_sort
from .srva import ReferenceVectorSet

logger = logging.getLogger(__name__)

NICHE_FLOOR = 1e-12
JITTER_FRACTION = 1e-6


def correction(x: np.ndarray) -> np.ndarray:
    """x**2 up to one, 2x - 1 beyond."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= 1.0, x ** 2, 2.0 * x - 1.0)


def niche_weights(ctx: TerritoryContext) -> np.ndarray:
    return 1.0 / (correction(ctx.d_ij / ctx.d_min) + 1.0)


def niche_counts(n_nds: np.ndarray, ctx: TerritoryContext) -> np.ndarray:
    """nc for every reference vector given the territory occupancy."""
    return niche_weights(ctx) @ np.asarray(n_nds, dtype=float)


def niche_count(i: int, n_nds: np.ndarray, ctx: TerritoryContext) -> float:
    weights = 1.0 / (correction(ctx.d_ij[i] / ctx.d_min) + 1.0)
    return float(weights @ np.asarray(n_nds, dtype=float))


def fitness(epbii: np.ndarray, nc: np.ndarray, rank: np.ndarray) -> np.ndarray:
    """EPBII / (nc * rank) with nc clamped away from zero."""
    return np.asarray(epbii, dtype=float) / (np.maximum(nc, NICHE_FLOOR) * np.asarray(rank, dtype=float))


@dataclass
class CandidateTable:
    X: np.ndarray
    epbii: np.ndarray
    f_hat: np.ndarray
    rank: np.ndarray
    labels: np.ndarray
    nc: np.ndarray = field(default=None)
    fitness: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return self.X.shape[0]


def build_candidate_table(X_c: np.ndarray, epbii: np.ndarray, models: Sequence[KrigingModel],
                          labels: np.ndarray) -> CandidateTable:
    """Surrogate means and joint Pareto ranks of the candidates."""
    f_hat = predict_means(models, X_c)
    rank = nondominated_sort(f_hat)
    n = X_c.shape[0]
    return CandidateTable(np.asarray(X_c, dtype=float), np.asarray(epbii, dtype=float), f_hat, rank,
                          np.asarray(labels, dtype=int), np.zeros(n), np.zeros(n))


@dataclass
class NicheState:
    """Number of non-dominated points inside each territory."""

    counts: np.ndarray

    def add(self, f_norm: np.ndarray, ref_set: ReferenceVectorSet, ctx: TerritoryContext) -> np.ndarray:
        inside = territory_matrix(f_norm, ref_set.vectors, ctx.theta_ref)[0] >= 0.0
        self.counts = self.counts + inside.astype(int)
        return inside


def initial_niche_state(nds_norm: np.ndarray, ref_set: ReferenceVectorSet, ctx: TerritoryContext) -> NicheState:
    nds_norm = np.atleast_2d(np.asarray(nds_norm, dtype=float))
    if nds_norm.shape[0] == 0:
        return NicheState(np.zeros(len(ref_set), dtype=int))
    inside = territory_matrix(nds_norm, ref_set.vectors, ctx.theta_ref) >= 0.0
    return NicheState(inside.sum(axis=0).astype(int))


@dataclass
class SelectionResult:
    indices: np.ndarray
    X: np.ndarray
    fitness: np.ndarray
    jittered: int = 0


def _is_known(x: np.ndarray, known: List[np.ndarray]) -> bool:
    return any(np.array_equal(x, k) for k in known)


def _deduplicate(x: np.ndarray, known: List[np.ndarray], lower: np.ndarray, upper: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    width = JITTER_FRACTION * (upper - lower)
    while _is_known(x, known):
        x = np.clip(x + rng.uniform(-1.0, 1.0, size=x.shape[0]) * width, lower, upper)
    return x


def select_additional(table: CandidateTable, n_pick: int, state: NicheState, ctx: TerritoryContext,
                      ref_set: ReferenceVectorSet, nu: NadirUtopia, lower: np.ndarray, upper: np.ndarray,
                      archive_X: Optional[np.ndarray], rng: np.random.Generator) -> SelectionResult:
    """Pick the highest-fitness candidate of clusters 0..n_pick-1 in order.

    After each pick its estimated objectives join every territory they fall
    in. Picks identical to an archived design or an earlier pick are
    nudged by a tiny uniform jitter.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    known = [] if archive_X is None else [row for row in np.atleast_2d(archive_X)]
    indices, picks, scores = [], [], []
    jittered = 0
    for cluster in range(n_pick):
        members = np.flatnonzero(table.labels == cluster)
        assert members.size > 0, f"cluster {cluster} has no candidate"
        table.nc = niche_counts(state.counts, ctx)
        table.fitness = fitness(table.epbii, table.nc, table.rank)
        best = int(members[np.argmax(table.fitness[members])])
        x = table.X[best].copy()
        chosen = _deduplicate(x, known, lower, upper, rng)
        if not np.array_equal(chosen, x):
            jittered += 1
            logger.warning(f"Candidate {best} duplicates an existing design; jittered")
        state.add(nu.normalize(table.f_hat[best])[None, :], ref_set, ctx)
        known.append(chosen)
        indices.append(best)
        picks.append(chosen)
        scores.append(float(table.fitness[best]))
    return SelectionResult(np.array(indices, dtype=int), np.array(picks).reshape(n_pick, table.X.shape[1]),
                           np.array(scores), jittered)
