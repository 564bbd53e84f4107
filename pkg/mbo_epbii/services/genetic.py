"""
Real-coded genetic operators and an elitist single-objective GA.

Shared by the Kriging likelihood search and the evolutionary engines.
Objective callables are batch functions: they receive an (n, m) population
and return one value per row.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..core.config import EAConfig

logger = logging.getLogger(__name__)

BatchObjective = Callable[[np.ndarray], np.ndarray]


@dataclass
class Individual:
    """Genes within bounds plus the fitness the problem assigned to them."""

    genes: np.ndarray
    fitness: float


def as_bounds(lower, upper) -> Tuple[np.ndarray, np.ndarray]:
    return np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)


def sbx_crossover(p1: np.ndarray, p2: np.ndarray, eta_c: float, p_c: float,
                  rng: np.random.Generator, lower: Optional[np.ndarray] = None,
                  upper: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover; children are clipped into the bounds."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    n_var = p1.shape[0]
    # draw every random number up front so the stream length does not depend on the branch
    mu = rng.random(n_var)
    flip = rng.random(n_var) < 0.5
    gene_mask = rng.random(n_var) < 0.5
    do_cross = rng.random() < p_c
    if not do_cross:
        return p1.copy(), p2.copy()
    beta = np.where(mu <= 0.5, (2.0 * mu) ** (1.0 / (eta_c + 1.0)),
                    (1.0 / (2.0 - 2.0 * mu)) ** (1.0 / (eta_c + 1.0)))
    beta = np.where(flip, -beta, beta)
    beta = np.where(gene_mask, beta, 1.0)
    mid = 0.5 * (p1 + p2)
    half = 0.5 * (p1 - p2)
    c1 = mid + beta * half
    c2 = mid - beta * half
    if lower is not None and upper is not None:
        lo, hi = as_bounds(lower, upper)
        c1 = np.clip(c1, lo, hi)
        c2 = np.clip(c2, lo, hi)
    return c1, c2


def polynomial_mutation(x: np.ndarray, eta_m: float, p_m: float, rng: np.random.Generator,
                        lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Bounded polynomial mutation applied gene-wise with probability p_m."""
    lo, hi = as_bounds(lower, upper)
    x = np.asarray(x, dtype=float).copy()
    n_var = x.shape[0]
    site = rng.random(n_var) < p_m
    mu = rng.random(n_var)
    span = hi - lo
    delta1 = (x - lo) / span
    delta2 = (hi - x) / span
    power = 1.0 / (eta_m + 1.0)
    low_branch = site & (mu <= 0.5)
    high_branch = site & (mu > 0.5)
    if low_branch.any():
        xy = 1.0 - delta1[low_branch]
        val = 2.0 * mu[low_branch] + (1.0 - 2.0 * mu[low_branch]) * xy ** (eta_m + 1.0)
        x[low_branch] += span[low_branch] * (val ** power - 1.0)
    if high_branch.any():
        xy = 1.0 - delta2[high_branch]
        val = 2.0 * (1.0 - mu[high_branch]) + 2.0 * (mu[high_branch] - 0.5) * xy ** (eta_m + 1.0)
        x[high_branch] += span[high_branch] * (1.0 - val ** power)
    return np.clip(x, lo, hi)


def offspring(parents_a: np.ndarray, parents_b: np.ndarray, cfg: EAConfig, rng: np.random.Generator,
               lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    p_m = cfg.mutation_probability(lower.shape[0])
    children = []
    for a, b in zip(parents_a, parents_b):
        c1, c2 = sbx_crossover(a, b, cfg.eta_c, cfg.p_c, rng, lower, upper)
        children.append(polynomial_mutation(c1, cfg.eta_m, p_m, rng, lower, upper))
        children.append(polynomial_mutation(c2, cfg.eta_m, p_m, rng, lower, upper))
    return np.array(children)


def _tournament(fitness: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.integers(0, fitness.shape[0], size=count)
    b = rng.integers(0, fitness.shape[0], size=count)
    return np.where(fitness[a] <= fitness[b], a, b)


def run_single_objective_ga(objective: BatchObjective, lower: np.ndarray, upper: np.ndarray,
                            cfg: EAConfig, rng: Optional[np.random.Generator] = None,
                            initial: Optional[np.ndarray] = None) -> Individual:
    """Minimize a batch objective with a generational, elitist real-coded GA.

    Returns the best individual ever evaluated.
    """
    lower, upper = as_bounds(lower, upper)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    n_pop = cfg.population_size
    pop = lower + rng.random((n_pop, lower.shape[0])) * (upper - lower)
    if initial is not None:
        initial = np.atleast_2d(initial)[:n_pop]
        pop[: initial.shape[0]] = np.clip(initial, lower, upper)
    fit = np.asarray(objective(pop), dtype=float).reshape(-1)
    best = int(np.argmin(fit))
    best_genes, best_fit = pop[best].copy(), float(fit[best])

    n_pairs = (n_pop + 1) // 2
    for gen in range(cfg.generations):
        idx = _tournament(fit, 2 * n_pairs, rng)
        children = offspring(pop[idx[:n_pairs]], pop[idx[n_pairs:]], cfg, rng, lower, upper)[:n_pop]
        child_fit = np.asarray(objective(children), dtype=float).reshape(-1)
        n_elite = min(cfg.elitism, n_pop)
        if n_elite:
            elite = np.argsort(fit, kind="stable")[:n_elite]
            worst = np.argsort(child_fit, kind="stable")[::-1][:n_elite]
            children[worst] = pop[elite]
            child_fit[worst] = fit[elite]
        pop, fit = children, child_fit
        gen_best = int(np.argmin(fit))
        if fit[gen_best] < best_fit:
            best_genes, best_fit = pop[gen_best].copy(), float(fit[gen_best])
    logger.debug(f"GA finished after {cfg.generations} generations, best fitness {best_fit:.6g}")
    return Individual(best_genes, best_fit)
