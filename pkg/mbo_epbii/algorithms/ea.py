"""
Evolutionary engines used inside the optimizer: NSGA-III for front estimation
on the surrogates and MOEA/D for per-reference-vector EPBII maximization.
The real-coded operators and the single-objective GA live in
`services.genetic` and are re-exported here.

Objective callables are batch functions: they receive an (n, m) population
and return one value (or one objective vector) per row.
"""

import logging
from collections import Counter
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..core.config import EAConfig
from ..services.genetic import (BatchObjective, Individual, as_bounds, offspring, polynomial_mutation,
                                run_single_objective_ga, sbx_crossover)
from .pareto import nondominated_sort

logger = logging.getLogger(__name__)

SubproblemObjective = Callable[[np.ndarray, np.ndarray], np.ndarray]

__all__ = [
    "BatchObjective", "Individual", "SubproblemObjective", "moead_neighborhoods", "nsga3_population_size",
    "polynomial_mutation", "run_moead_epbii", "run_nsga3", "run_single_objective_ga", "sbx_crossover",
]


def nsga3_population_size(n_ref_dirs: int) -> int:
    """Reference-direction count rounded up to a multiple of four."""
    return int(4 * np.ceil(n_ref_dirs / 4.0))


def _nsga3_survival(F: np.ndarray, n_survive: int, ref_dirs: np.ndarray, ideal: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
    ranks = nondominated_sort(F)
    order = np.argsort(ranks, kind="stable")
    counts = np.cumsum(np.bincount(ranks)[1:])
    last_rank = int(np.searchsorted(counts, n_survive) + 1)
    survivors = np.flatnonzero(ranks < last_rank)
    last_front = np.flatnonzero(ranks == last_rank)
    if survivors.size + last_front.size == n_survive or survivors.size == n_survive:
        chosen = np.concatenate([survivors, last_front])[:n_survive]
        return chosen
    considered = np.concatenate([survivors, last_front])
    T = F[considered] - ideal
    n_obj = F.shape[1]

    # extreme points and hyperplane intercepts
    weights = np.eye(n_obj) + 1e-6
    asf = np.max(T[:, None, :] / weights[None, :, :], axis=2)
    extreme = T[np.argmin(asf, axis=0)]
    intercepts = None
    try:
        plane = np.linalg.solve(extreme, np.ones(n_obj))
        candidate = 1.0 / plane
        if np.all(np.isfinite(candidate)) and np.all(candidate > 1e-10):
            intercepts = candidate
    except np.linalg.LinAlgError:
        pass
    if intercepts is None:
        intercepts = np.max(T, axis=0)
    intercepts = np.where(intercepts > 1e-10, intercepts, 1.0)
    N = T / intercepts

    # perpendicular-distance association
    unit_dirs = ref_dirs / np.linalg.norm(ref_dirs, axis=1, keepdims=True)
    proj = N @ unit_dirs.T
    sq_norm = np.sum(N ** 2, axis=1, keepdims=True)
    perp = np.sqrt(np.maximum(sq_norm - proj ** 2, 0.0))
    niche = np.argmin(perp, axis=1)
    dist = perp[np.arange(len(considered)), niche]

    n_first = survivors.size
    rho = np.zeros(ref_dirs.shape[0], dtype=int)
    for key, value in Counter(niche[:n_first].tolist()).items():
        rho[key] = value
    remaining = n_survive - n_first
    chosen = np.zeros(last_front.size, dtype=bool)
    active = np.ones(ref_dirs.shape[0], dtype=bool)
    last_niche = niche[n_first:]
    last_dist = dist[n_first:]
    while remaining > 0:
        candidates = np.flatnonzero(active)
        min_rho = rho[candidates].min()
        j = int(rng.choice(candidates[rho[candidates] == min_rho]))
        members = np.flatnonzero((~chosen) & (last_niche == j))
        if members.size == 0:
            active[j] = False
            continue
        if rho[j] == 0:
            d = last_dist[members]
            closest = members[d == d.min()]
            pick = int(rng.choice(closest))
        else:
            pick = int(rng.choice(members))
        chosen[pick] = True
        rho[j] += 1
        remaining -= 1
    return np.concatenate([survivors, last_front[chosen]])


def run_nsga3(objectives: BatchObjective, lower: np.ndarray, upper: np.ndarray,
              ref_dirs: np.ndarray, cfg: EAConfig,
              rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """NSGA-III with fixed reference directions.

    Returns the non-dominated members (X, F) of the final population. The
    population size is the direction count rounded up to a multiple of four.
    """
    lower, upper = as_bounds(lower, upper)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    ref_dirs = np.asarray(ref_dirs, dtype=float)
    n_pop = nsga3_population_size(ref_dirs.shape[0])
    X = lower + rng.random((n_pop, lower.shape[0])) * (upper - lower)
    F = np.asarray(objectives(X), dtype=float)
    ideal = F.min(axis=0)
    for gen in range(cfg.generations):
        perm = rng.permutation(n_pop)
        half = n_pop // 2
        children = offspring(X[perm[:half]], X[perm[half: 2 * half]], cfg, rng, lower, upper)
        child_F = np.asarray(objectives(children), dtype=float)
        X_all = np.vstack([X, children])
        F_all = np.vstack([F, child_F])
        ideal = np.minimum(ideal, child_F.min(axis=0))
        keep = _nsga3_survival(F_all, n_pop, ref_dirs, ideal, rng)
        X, F = X_all[keep], F_all[keep]
        if (gen + 1) % 50 == 0:
            logger.debug(f"NSGA-III generation {gen + 1}/{cfg.generations}")
    front = nondominated_sort(F) == 1
    return X[front], F[front]


def moead_neighborhoods(ref_vectors: np.ndarray, size: Optional[int] = None) -> np.ndarray:
    """Indices of the T closest reference vectors (self first) for every vector."""
    ref_vectors = np.asarray(ref_vectors, dtype=float)
    n = ref_vectors.shape[0]
    if size is None:
        size = max(2, int(np.ceil(n / 10.0)))
    size = min(size, n)
    distances = cdist(ref_vectors, ref_vectors)
    np.fill_diagonal(distances, -1.0)
    return np.argsort(distances, axis=1, kind="stable")[:, :size]


def run_moead_epbii(score: SubproblemObjective, init_pop: np.ndarray, ref_vectors: np.ndarray,
                    lower: np.ndarray, upper: np.ndarray, cfg: EAConfig,
                    rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """MOEA/D maximizing one scalar target per subproblem.

    `score(X, idx)` returns the target of subproblem idx[k] at X[k]. A child is
    tested against the subproblems of its mating pool and replaces at most
    `cfg.replacement_cap` incumbents it strictly improves. Returns the per-
    subproblem best designs and their values.
    """
    lower, upper = as_bounds(lower, upper)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    X = np.clip(np.array(init_pop, dtype=float), lower, upper)
    n_sub = X.shape[0]
    if np.asarray(ref_vectors).shape[0] != n_sub:
        raise ValueError("MOEA/D needs one initial individual per reference vector")
    values = np.asarray(score(X, np.arange(n_sub)), dtype=float).reshape(-1)
    if cfg.generations == 0 or n_sub == 0:
        return X, values
    neighbors = moead_neighborhoods(ref_vectors, cfg.neighborhood_size)
    p_m = cfg.mutation_probability(lower.shape[0])
    everyone = np.arange(n_sub)
    for gen in range(cfg.generations):
        for i in rng.permutation(n_sub):
            pool = neighbors[i] if rng.random() < cfg.delta else everyone
            if pool.size >= 2:
                a, b = rng.choice(pool, size=2, replace=False)
            else:
                a = b = pool[0]
            c1, _ = sbx_crossover(X[a], X[b], cfg.eta_c, cfg.p_c, rng, lower, upper)
            child = polynomial_mutation(c1, cfg.eta_m, p_m, rng, lower, upper)
            targets = rng.permutation(pool)
            child_values = np.asarray(score(np.repeat(child[None, :], targets.size, axis=0), targets),
                                      dtype=float).reshape(-1)
            replaced = 0
            for j, v in zip(targets, child_values):
                if replaced >= cfg.replacement_cap:
                    break
                if v > values[j]:
                    X[j] = child
                    values[j] = v
                    replaced += 1
    return X, values
