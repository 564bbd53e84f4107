"""
Expected PBI improvement (EPBII) infill criterion.

All geometry is done in the normalized objective space (utopia at the
origin, nadir at one). A reference vector's territory is the cone
d1 - theta_ref * d2 >= 0 around it; EPBII is the Monte Carlo mean of the
PBI improvement over the best in-territory sample, and the (negative)
territory value when the predicted mean lies outside the cone.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..core.config import EAConfig
from ..core.exceptions import InputDomainError
from ..services.doe import latin_hypercube, scale_to_bounds
from ..services.kriging import KrigingModel, predict_all
from .ea import run_moead_epbii
from .pareto import NadirUtopia
from .srva import ReferenceVectorSet

logger = logging.getLogger(__name__)

NARROW_THETA_REF = 10.0 * np.sqrt(2.0)


def _pbi_parts(F: np.ndarray, L: np.ndarray, theta_pbi: float):
    """Broadcast PBI over the last axis: returns (g, d1, d2)."""
    d1 = np.abs(np.sum(F * L, axis=-1))
    d2 = np.linalg.norm(F - d1[..., None] * L, axis=-1)
    return d1 + theta_pbi * d2, d1, d2


def pbi(f_norm: np.ndarray, lam: np.ndarray, theta_pbi: float = 1.0) -> Tuple[float, float, float]:
    """Penalty-based boundary intersection value with its two distances."""
    g, d1, d2 = _pbi_parts(np.asarray(f_norm, dtype=float), np.asarray(lam, dtype=float), theta_pbi)
    return float(g), float(d1), float(d2)


def pbi_batch(F_norm: np.ndarray, lam: np.ndarray, theta_pbi: float = 1.0) -> np.ndarray:
    """PBI values of every row of F_norm with respect to one vector."""
    return _pbi_parts(np.atleast_2d(np.asarray(F_norm, dtype=float)), np.asarray(lam, dtype=float), theta_pbi)[0]


def territory(f_norm: np.ndarray, lam: np.ndarray, theta_ref: float) -> float:
    _, d1, d2 = _pbi_parts(np.asarray(f_norm, dtype=float), np.asarray(lam, dtype=float), 0.0)
    return float(d1 - theta_ref * d2)


def territory_matrix(F_norm: np.ndarray, vectors: np.ndarray, theta_ref: float) -> np.ndarray:
    """T[k, i] for sample k and reference vector i."""
    F = np.atleast_2d(np.asarray(F_norm, dtype=float))[:, None, :]
    _, d1, d2 = _pbi_parts(F, np.asarray(vectors, dtype=float)[None, :, :], 0.0)
    return d1 - theta_ref * d2


def pbi_matrix(F_norm: np.ndarray, vectors: np.ndarray, theta_pbi: float) -> np.ndarray:
    F = np.atleast_2d(np.asarray(F_norm, dtype=float))[:, None, :]
    return _pbi_parts(F, np.asarray(vectors, dtype=float)[None, :, :], theta_pbi)[0]


@dataclass(frozen=True)
class TerritoryContext:
    """Per-iteration constants of the territory geometry."""

    theta_ref: float
    d_min: float
    d_ij: np.ndarray
    theta_pbi: float = 1.0
    g_ref: Optional[np.ndarray] = None
    membership: Optional[np.ndarray] = None  # (n_samples, N_ref) bool

    @property
    def occupancy(self) -> np.ndarray:
        return self.membership.sum(axis=0)


def compute_theta_ref(ref_set: ReferenceVectorSet, theta_pbi: float = 1.0) -> TerritoryContext:
    """theta_ref = sqrt(2) / d_min with d_min the mean nearest-neighbour distance
    of the vectors projected onto the unit simplex hyperplane."""
    V = ref_set.vectors
    projected = V / V.sum(axis=1, keepdims=True)
    d_ij = cdist(projected, projected)
    n = V.shape[0]
    if n < 2:
        logger.warning("Single reference vector; using the narrow territory fallback")
        return TerritoryContext(NARROW_THETA_REF, np.sqrt(2.0) / NARROW_THETA_REF, d_ij, theta_pbi)
    masked = d_ij + np.diag(np.full(n, np.inf))
    nearest = masked.min(axis=1)
    duplicates = ~(nearest > 0)
    if duplicates.all():
        logger.warning("All projected reference vectors coincide; using the narrow territory fallback")
        return TerritoryContext(NARROW_THETA_REF, np.sqrt(2.0) / NARROW_THETA_REF, d_ij, theta_pbi)
    if duplicates.any():
        logger.warning(f"{int(duplicates.sum())} duplicate projected reference vectors excluded from d_min")
    d_min = float(np.mean(nearest[~duplicates]))
    return TerritoryContext(float(np.sqrt(2.0) / d_min), d_min, d_ij, theta_pbi)


def reference_pbi(F_norm: np.ndarray, ref_set: ReferenceVectorSet, ctx: TerritoryContext) -> TerritoryContext:
    """Attach the per-vector reference PBI and the territory membership of the samples.

    g_ref is the minimum PBI over samples inside the territory; an empty
    territory falls back to the minimum PBI over all samples.
    """
    F_norm = np.atleast_2d(np.asarray(F_norm, dtype=float))
    if F_norm.shape[0] == 0:
        raise InputDomainError("reference PBI needs at least one sample")
    membership = territory_matrix(F_norm, ref_set.vectors, ctx.theta_ref) >= 0.0
    G = pbi_matrix(F_norm, ref_set.vectors, ctx.theta_pbi)
    global_min = G.min(axis=0)
    inside_min = np.where(membership, G, np.inf).min(axis=0)
    empty = ~membership.any(axis=0)
    if empty.any():
        logger.warning(f"{int(empty.sum())} of {len(ref_set)} territories hold no sample; using the global PBI minimum")
    g_ref = np.where(empty, global_min, inside_min)
    return replace(ctx, g_ref=g_ref, membership=membership)


@dataclass(frozen=True)
class MCSampleBlock:
    """Standard-normal draws shared by every EPBII evaluation of one iteration."""

    z: np.ndarray

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.z, dtype=float)).copy()
        if z.shape[0] < 1:
            raise InputDomainError("the Monte Carlo block needs at least one draw")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def count(self) -> int:
        return self.z.shape[0]


def draw_sample_block(count: int, n_obj: int, rng: np.random.Generator) -> MCSampleBlock:
    if count < 1:
        raise InputDomainError(f"Monte Carlo count must be positive, got {count}")
    return MCSampleBlock(rng.standard_normal((count, n_obj)))


def epbii_from_predictions(mean_norm: np.ndarray, std_norm: np.ndarray, vectors: np.ndarray,
                           g_ref: np.ndarray, z: np.ndarray, theta_ref: float,
                           theta_pbi: float = 1.0) -> np.ndarray:
    """EPBII for k (normalized mean, std, vector, g_ref) rows sharing the draws z."""
    mean_norm = np.atleast_2d(mean_norm)
    std_norm = np.atleast_2d(std_norm)
    vectors = np.atleast_2d(vectors)
    _, d1, d2 = _pbi_parts(mean_norm, vectors, 0.0)
    t = d1 - theta_ref * d2
    realizations = mean_norm[:, None, :] + std_norm[:, None, :] * z[None, :, :]
    g, _, _ = _pbi_parts(realizations, vectors[:, None, :], theta_pbi)
    improvement = np.maximum(np.asarray(g_ref, dtype=float)[:, None] - g, 0.0).mean(axis=1)
    return np.where(t >= 0.0, improvement, t)


class EPBIIEvaluator:
    """Scores design points for reference-vector subproblems with fixed iteration constants."""

    def __init__(self, models: Sequence[KrigingModel], nu: NadirUtopia, ref_set: ReferenceVectorSet,
                 ctx: TerritoryContext, mc: MCSampleBlock):
        if ctx.g_ref is None:
            raise InputDomainError("territory context has no reference PBI values")
        self.models = list(models)
        self.nu = nu
        self.ref_set = ref_set
        self.ctx = ctx
        self.mc = mc

    def score(self, X: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """EPBII of X[k] for reference vector idx[k]."""
        idx = np.asarray(idx, dtype=int)
        mean, variance = predict_all(self.models, X)
        mean_norm = self.nu.normalize(mean)
        std_norm = np.sqrt(variance) / self.nu.scale
        return epbii_from_predictions(mean_norm, std_norm, self.ref_set.vectors[idx], self.ctx.g_ref[idx],
                                      self.mc.z, self.ctx.theta_ref, self.ctx.theta_pbi)


def epbii_value(x: np.ndarray, lam: np.ndarray, g_ref: float, models: Sequence[KrigingModel],
                nu: NadirUtopia, mc: MCSampleBlock, ctx: TerritoryContext) -> float:
    """EPBII of one design point for one reference vector."""
    mean, variance = predict_all(models, np.asarray(x, dtype=float).reshape(1, -1))
    value = epbii_from_predictions(nu.normalize(mean), np.sqrt(variance) / nu.scale,
                                   np.asarray(lam, dtype=float).reshape(1, -1), np.array([g_ref]),
                                   mc.z, ctx.theta_ref, ctx.theta_pbi)
    return float(value[0])


def seed_population(ref_set: ReferenceVectorSet, front_X: np.ndarray, front_F_norm: np.ndarray,
                    lower: np.ndarray, upper: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One starting design per vector: the estimated-front member best aligned with it.

    Falls back to a Latin hypercube when the estimated front is empty.
    """
    front_X = np.asarray(front_X, dtype=float)
    if front_X.size == 0:
        logger.warning("Estimated front is empty; seeding EPBII maximization from a Latin hypercube")
        return scale_to_bounds(latin_hypercube(len(ref_set), np.asarray(lower).shape[0], rng), lower, upper)
    F = np.atleast_2d(front_F_norm)
    norms = np.linalg.norm(F, axis=1)
    cosine = (F @ ref_set.vectors.T) / np.where(norms > 0, norms, 1.0)[:, None]
    return np.atleast_2d(front_X)[np.argmax(cosine, axis=0)].copy()


def maximize_epbii(evaluator: EPBIIEvaluator, front_X: np.ndarray, front_F_norm: np.ndarray,
                   lower: np.ndarray, upper: np.ndarray, cfg: EAConfig, rng: np.random.Generator,
                   fallback_rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """One candidate design per reference vector with its EPBII value."""
    initial = seed_population(evaluator.ref_set, front_X, front_F_norm, lower, upper,
                              fallback_rng if fallback_rng is not None else rng)
    X_c, values = run_moead_epbii(evaluator.score, initial, evaluator.ref_set.vectors, lower, upper, cfg, rng)
    logger.debug(f"EPBII maximization: best {values.max():.4g}, {int((values > 0).sum())} positive")
    return X_c, values
