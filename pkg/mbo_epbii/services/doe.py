"""
Design of experiments: Latin hypercube sampling for the initial design.
"""

import numpy as np
from scipy.stats import qmc

from ..core.exceptions import InputDomainError


def latin_hypercube(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """n x m design in the unit hypercube with one point per stratum and column.

    Strata are assigned by an independent permutation per column and each point
    is placed uniformly at random inside its stratum.
    """
    if n < 1 or m < 1:
        raise InputDomainError(f"latin_hypercube needs n >= 1 and m >= 1, got n={n}, m={m}")
    sampler = qmc.LatinHypercube(d=m, scramble=True, rng=rng)
    design = sampler.random(n)
    design.setflags(write=False)
    return design


def scale_to_bounds(design: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Affine map from the unit hypercube onto [lower, upper]."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return np.clip(lower + np.asarray(design) * (upper - lower), lower, upper)


def strata_indices(design: np.ndarray) -> np.ndarray:
    """Stratum index of every entry, floor(n * value)."""
    design = np.asarray(design)
    n = design.shape[0]
    return np.minimum(np.floor(design * n).astype(int), n - 1)
