"""
Benchmark problem service.
DTLZ1-DTLZ7 with analytic Pareto-front samplers used for IGD+ reference sets.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional, Type, Union

import numpy as np

from ..core.exceptions import InputDomainError, UnsupportedProblemError
from ..core.utils import read_matrix_csv, write_matrix_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProblemSpec:
    """Name, objective count M, design-variable count m and box bounds."""

    name: str
    n_obj: int
    n_var: int
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if self.n_obj < 2:
            raise InputDomainError(f"M must be at least 2, got {self.n_obj}")
        if self.n_var < self.n_obj:
            raise InputDomainError(f"m={self.n_var} must be at least M={self.n_obj}")
        if lower.shape != (self.n_var,) or upper.shape != (self.n_var,):
            raise InputDomainError("bounds must be m-vectors")
        if np.any(lower >= upper):
            raise InputDomainError("lower bounds must be strictly below upper bounds")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


class Problem:
    """Base class for box-bounded minimization problems."""

    name = "problem"

    def __init__(self, n_obj: int, n_var: int):
        self.spec = ProblemSpec(self.name, n_obj, n_var, np.zeros(n_var), np.ones(n_var))

    @property
    def n_obj(self) -> int:
        return self.spec.n_obj

    @property
    def n_var(self) -> int:
        return self.spec.n_var

    @property
    def lower(self) -> np.ndarray:
        return self.spec.lower

    @property
    def upper(self) -> np.ndarray:
        return self.spec.upper

    @property
    def objective_lower_bound(self) -> np.ndarray:
        """Componentwise bound below every attainable objective vector."""
        return np.zeros(self.n_obj)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_var:
            raise InputDomainError(f"{self.name}: expected {self.n_var} variables, got {X.shape[1]}")
        if np.any(X < self.lower) or np.any(X > self.upper) or not np.all(np.isfinite(X)):
            raise InputDomainError(f"{self.name}: design point outside [{self.lower.min()}, {self.upper.max()}]^m")
        return X

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Objective vector of one design point."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise InputDomainError("evaluate expects a single m-vector")
        return self.evaluate_batch(x[None, :])[0]

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        """Objective matrix (n, M) of an (n, m) design matrix."""
        return self._evaluate(self._check(X))

    def _evaluate(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_true_pf(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise UnsupportedProblemError(f"{self.name} has no Pareto-front sampler")


class DTLZ(Problem):
    """Common machinery of the DTLZ family (k = m - M + 1 distance variables)."""

    @property
    def k(self) -> int:
        return self.n_var - self.n_obj + 1

    @staticmethod
    def _rastrigin_g(Xm: np.ndarray) -> np.ndarray:
        k = Xm.shape[1]
        return 100.0 * (k + np.sum((Xm - 0.5) ** 2 - np.cos(20.0 * np.pi * (Xm - 0.5)), axis=1))

    @staticmethod
    def _sphere_g(Xm: np.ndarray) -> np.ndarray:
        return np.sum((Xm - 0.5) ** 2, axis=1)

    def _linear_front(self, Xp: np.ndarray, g: np.ndarray) -> np.ndarray:
        n, M = Xp.shape[0], self.n_obj
        F = np.empty((n, M))
        for i in range(M):
            f = 0.5 * (1.0 + g)
            f = f * np.prod(Xp[:, : M - 1 - i], axis=1)
            if i > 0:
                f = f * (1.0 - Xp[:, M - 1 - i])
            F[:, i] = f
        return F

    def _spherical_front(self, angles: np.ndarray, g: np.ndarray) -> np.ndarray:
        """angles are in [0, pi/2]; one column per position variable."""
        n, M = angles.shape[0], self.n_obj
        F = np.empty((n, M))
        for i in range(M):
            f = 1.0 + g
            f = f * np.prod(np.cos(angles[:, : M - 1 - i]), axis=1)
            if i > 0:
                f = f * np.sin(angles[:, M - 1 - i])
            F[:, i] = f
        return F

    @staticmethod
    def _random_simplex(count: int, n_obj: int, rng: np.random.Generator) -> np.ndarray:
        return rng.dirichlet(np.ones(n_obj), size=count)

    @staticmethod
    def _random_sphere(count: int, n_obj: int, rng: np.random.Generator) -> np.ndarray:
        points = np.abs(rng.standard_normal((count, n_obj)))
        norms = np.linalg.norm(points, axis=1, keepdims=True)
        while np.any(norms < 1e-12):
            bad = norms[:, 0] < 1e-12
            points[bad] = np.abs(rng.standard_normal((int(bad.sum()), n_obj)))
            norms = np.linalg.norm(points, axis=1, keepdims=True)
        return points / norms


class DTLZ1(DTLZ):
    name = "dtlz1"

    def _evaluate(self, X):
        M = self.n_obj
        g = self._rastrigin_g(X[:, M - 1:])
        return self._linear_front(X[:, : M - 1], g)

    def sample_true_pf(self, count, rng):
        return 0.5 * self._random_simplex(count, self.n_obj, rng)


class DTLZ2(DTLZ):
    name = "dtlz2"

    def _evaluate(self, X):
        M = self.n_obj
        g = self._sphere_g(X[:, M - 1:])
        return self._spherical_front(X[:, : M - 1] * np.pi / 2.0, g)

    def sample_true_pf(self, count, rng):
        return self._random_sphere(count, self.n_obj, rng)


class DTLZ3(DTLZ2):
    name = "dtlz3"

    def _evaluate(self, X):
        M = self.n_obj
        g = self._rastrigin_g(X[:, M - 1:])
        return self._spherical_front(X[:, : M - 1] * np.pi / 2.0, g)


class DTLZ4(DTLZ2):
    name = "dtlz4"
    alpha = 100.0

    def _evaluate(self, X):
        M = self.n_obj
        g = self._sphere_g(X[:, M - 1:])
        return self._spherical_front(X[:, : M - 1] ** self.alpha * np.pi / 2.0, g)


class DTLZ5(DTLZ):
    name = "dtlz5"

    def _g(self, Xm: np.ndarray) -> np.ndarray:
        return self._sphere_g(Xm)

    def _evaluate(self, X):
        M = self.n_obj
        g = self._g(X[:, M - 1:])
        angles = np.empty((X.shape[0], M - 1))
        angles[:, 0] = X[:, 0] * np.pi / 2.0
        if M > 2:
            gg = g[:, None]
            angles[:, 1:] = np.pi / (4.0 * (1.0 + gg)) * (1.0 + 2.0 * gg * X[:, 1: M - 1])
        return self._spherical_front(angles, g)

    def sample_true_pf(self, count, rng):
        # g = 0 pins every angle but the first to pi/4; the front is a curve in t.
        t = rng.uniform(0.0, 1.0, size=count)
        angles = np.full((count, self.n_obj - 1), np.pi / 4.0)
        angles[:, 0] = t * np.pi / 2.0
        return self._spherical_front(angles, np.zeros(count))


class DTLZ6(DTLZ5):
    name = "dtlz6"

    def _g(self, Xm):
        return np.sum(Xm ** 0.1, axis=1)


def dtlz7_tradeoff(x: np.ndarray) -> np.ndarray:
    """Single-variable term x(1 + sin 3*pi*x) whose maximization lowers the last objective."""
    return x * (1.0 + np.sin(3.0 * np.pi * x))


@lru_cache(maxsize=4)
def dtlz7_optimal_intervals(resolution: int = 1_000_000) -> np.ndarray:
    """Disconnected intervals of optimal position variables, by grid brute force.

    A value x is optimal iff its trade-off term exceeds that of every smaller x.
    """
    grid = np.linspace(0.0, 1.0, resolution + 1)
    u = dtlz7_tradeoff(grid)
    running = np.maximum.accumulate(u)
    optimal = np.empty_like(u, dtype=bool)
    optimal[0] = True
    optimal[1:] = u[1:] > running[:-1]
    edges = np.flatnonzero(np.diff(optimal.astype(np.int8)))
    starts = [0] if optimal[0] else []
    ends = []
    for e in edges:
        if optimal[e]:
            ends.append(e)
        else:
            starts.append(e + 1)
    if optimal[-1]:
        ends.append(len(grid) - 1)
    intervals = np.array([[grid[s], grid[e]] for s, e in zip(starts, ends)])
    intervals.setflags(write=False)
    return intervals


class DTLZ7(DTLZ):
    name = "dtlz7"

    def _h(self, Fp: np.ndarray, g: np.ndarray) -> np.ndarray:
        return self.n_obj - np.sum(Fp / (1.0 + g[:, None]) * (1.0 + np.sin(3.0 * np.pi * Fp)), axis=1)

    def _evaluate(self, X):
        M = self.n_obj
        g = 1.0 + 9.0 / self.k * np.sum(X[:, M - 1:], axis=1)
        F = np.empty((X.shape[0], M))
        F[:, : M - 1] = X[:, : M - 1]
        F[:, M - 1] = (1.0 + g) * self._h(F[:, : M - 1], g)
        return F

    def sample_true_pf(self, count, rng):
        intervals = dtlz7_optimal_intervals()
        lo, hi = float(intervals[0, 0]), float(intervals[-1, 1])
        Fp = np.empty((count, self.n_obj - 1))
        for j in range(self.n_obj - 1):
            filled = 0
            while filled < count:
                draw = rng.uniform(lo, hi, size=2 * (count - filled))
                inside = np.any((draw[:, None] >= intervals[:, 0]) & (draw[:, None] <= intervals[:, 1]), axis=1)
                accepted = draw[inside][: count - filled]
                Fp[filled: filled + len(accepted), j] = accepted
                filled += len(accepted)
        g = np.ones(count)
        F = np.empty((count, self.n_obj))
        F[:, : self.n_obj - 1] = Fp
        F[:, -1] = (1.0 + g) * self._h(Fp, g)
        return F


PROBLEMS: Dict[str, Type[Problem]] = {
    cls.name: cls for cls in (DTLZ1, DTLZ2, DTLZ3, DTLZ4, DTLZ5, DTLZ6, DTLZ7)
}


def get_problem(name: str, n_obj: int, n_var: int = 10) -> Problem:
    """Instantiate a benchmark problem by name ("dtlz1" ... "dtlz7")."""
    key = name.strip().lower()
    if key not in PROBLEMS:
        raise UnsupportedProblemError(f"unknown problem '{name}'; available: {sorted(PROBLEMS)}")
    return PROBLEMS[key](n_obj, n_var)


def evaluate(problem: Problem, x: np.ndarray) -> np.ndarray:
    """Exact objective vector of `x`; deterministic."""
    return problem.evaluate(x)


def evaluate_batch(problem: Problem, X: np.ndarray) -> np.ndarray:
    return problem.evaluate_batch(X)


def sample_true_pf(problem: Problem, count: int, rng: np.random.Generator) -> np.ndarray:
    """`count` points on the analytic Pareto front of `problem`."""
    if count <= 0:
        raise InputDomainError(f"count must be positive, got {count}")
    return problem.sample_true_pf(count, rng)


def reference_set_path(cache_dir: Union[str, Path], problem: Problem, count: int, seed: int) -> Path:
    return Path(cache_dir) / f"{problem.name}_m{problem.n_obj}_n{count}_s{seed}.csv"


def load_reference_set(problem: Problem, count: int, seed: int,
                       cache_dir: Optional[Union[str, Path]] = None) -> np.ndarray:
    """IGD+ reference cloud, generated once per (problem, M, count, seed) and cached as CSV."""
    if cache_dir is not None:
        path = reference_set_path(cache_dir, problem, count, seed)
        if path.exists():
            points = read_matrix_csv(path)
            if points.shape == (count, problem.n_obj):
                return points
            logger.warning(f"Ignoring malformed reference cache {path}")
    points = sample_true_pf(problem, count, np.random.default_rng(seed))
    if cache_dir is not None:
        write_matrix_csv(path, points)
        logger.info(f"Cached {count} reference points for {problem.name} M={problem.n_obj} at {path}")
    return points
