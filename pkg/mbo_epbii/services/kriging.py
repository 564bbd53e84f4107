"""
Ordinary Kriging surrogate service.

One model per objective: Gaussian correlation with per-dimension weights,
concentrated maximum-likelihood estimates of the mean and process variance,
and a GA over log10(theta) for the remaining hyperparameters. Inputs are
scaled to the unit hypercube and outputs standardized before fitting.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from ..core.config import EAConfig, LikelihoodGAConfig
from ..core.exceptions import InputDomainError, KrigingFitError
from .genetic import run_single_objective_ga

logger = logging.getLogger(__name__)

# returned when the concentrated likelihood is undefined (constant outputs)
LIKELIHOOD_UNDEFINED = -1.0e10


def correlation(xi: np.ndarray, xj: np.ndarray, theta: np.ndarray) -> float:
    """exp(-sum_k theta_k (xi_k - xj_k)^2)."""
    diff = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    return float(np.exp(-np.sum(np.asarray(theta, dtype=float) * diff ** 2)))


def correlation_matrix(XA: np.ndarray, XB: np.ndarray, theta: np.ndarray) -> np.ndarray:
    root = np.sqrt(np.asarray(theta, dtype=float))
    return np.exp(-cdist(np.atleast_2d(XA) * root, np.atleast_2d(XB) * root, "sqeuclidean"))


@dataclass(frozen=True)
class _Factorization:
    chol: Tuple[np.ndarray, bool]
    nugget: float
    mu_hat: float
    sigma2_hat: float
    residual_weights: np.ndarray  # R^-1 (y - 1 mu)
    ones_weights: np.ndarray  # R^-1 1
    ones_dot: float  # 1^T R^-1 1
    log_det: float


def _factorize(X: np.ndarray, y: np.ndarray, theta: np.ndarray, nugget: float) -> _Factorization:
    n = X.shape[0]
    R = correlation_matrix(X, X, theta) + nugget * np.eye(n)
    chol = cho_factor(R, lower=True, check_finite=False)
    if not np.all(np.isfinite(chol[0])) or np.any(np.diag(chol[0]) <= 0):
        raise LinAlgError("non-positive pivot")
    ones = np.ones(n)
    ones_weights = cho_solve(chol, ones, check_finite=False)
    ones_dot = float(ones @ ones_weights)
    mu_hat = float(ones_weights @ y) / ones_dot
    residual = y - mu_hat
    residual_weights = cho_solve(chol, residual, check_finite=False)
    sigma2_hat = float(residual @ residual_weights) / n
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    return _Factorization(chol, nugget, mu_hat, sigma2_hat, residual_weights, ones_weights, ones_dot, log_det)


def _factorize_with_ladder(X, y, theta, nugget: float, max_nugget: float) -> _Factorization:
    """Cholesky of R + nugget*I, multiplying the nugget by 10 until it succeeds."""
    current = nugget
    while True:
        try:
            return _factorize(X, y, theta, current)
        except (LinAlgError, ValueError):
            if current >= max_nugget:
                raise KrigingFitError(f"correlation matrix not positive definite at nugget {current:g}")
            current = min(max(current * 10.0, 1e-16), max_nugget)


def _likelihood_value(fact: _Factorization, n: int) -> float:
    if not fact.sigma2_hat > 1e-300:
        return LIKELIHOOD_UNDEFINED
    return -0.5 * (n * np.log(fact.sigma2_hat) + fact.log_det)


def log_likelihood(theta: np.ndarray, X: np.ndarray, y: np.ndarray, nugget: float = 1e-10,
                   max_nugget: float = 1e-4) -> float:
    """Concentrated log-likelihood -(n ln sigma2 + ln|R|)/2 of the training data.

    Constant outputs make sigma2 vanish; `LIKELIHOOD_UNDEFINED` is returned then.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if np.ptp(y) == 0:
        return LIKELIHOOD_UNDEFINED
    fact = _factorize_with_ladder(X, y, np.asarray(theta, dtype=float), nugget, max_nugget)
    return _likelihood_value(fact, X.shape[0])


@dataclass(frozen=True)
class KrigingModel:
    """A fitted, immutable ordinary Kriging model of one objective."""

    X: np.ndarray  # scaled training inputs (n, m)
    y: np.ndarray  # standardized training outputs (n,)
    theta: np.ndarray
    mu_hat: float
    sigma2_hat: float
    nugget: float
    x_offset: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_std: float
    log_likelihood: float
    constant: bool = False
    _fact: Optional[_Factorization] = field(default=None, repr=False, compare=False)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    def scale_inputs(self, X: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(np.asarray(X, dtype=float)) - self.x_offset) / self.x_scale

    def summary(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "mu_hat": self.mu_hat,
            "sigma2_hat": self.sigma2_hat,
            "nugget": self.nugget,
            "log_likelihood": self.log_likelihood,
            "y_mean": self.y_mean,
            "y_std": self.y_std,
        }


def _deduplicate(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Collapse identical rows, keeping the most recent observation."""
    _, first_from_end = np.unique(X[::-1], axis=0, return_index=True)
    keep = np.sort(X.shape[0] - 1 - first_from_end)
    if keep.size < X.shape[0]:
        logger.warning(f"Dropped {X.shape[0] - keep.size} duplicate training inputs")
    return X[keep], y[keep]


def _likelihood_ga_settings(cfg: LikelihoodGAConfig) -> EAConfig:
    return EAConfig(
        population_size=cfg.population_size,
        generations=cfg.generations,
        eta_c=cfg.eta_c,
        p_c=cfg.p_c,
        eta_m=cfg.eta_m,
        p_m=cfg.p_m,
        elitism=cfg.elitism,
        seed=cfg.seed,
    )


def fit(X: np.ndarray, y: np.ndarray, cfg: Optional[LikelihoodGAConfig] = None,
        lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None) -> KrigingModel:
    """Fit an ordinary Kriging model by GA maximization of the likelihood."""
    cfg = cfg or LikelihoodGAConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise InputDomainError("X and y must have the same number of rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputDomainError("training data must be finite")
    X, y = _deduplicate(X, y)
    n, m = X.shape
    if n < 2:
        raise InputDomainError("Kriging needs at least two distinct training inputs")

    x_offset = X.min(axis=0) if lower is None else np.asarray(lower, dtype=float)
    x_top = X.max(axis=0) if upper is None else np.asarray(upper, dtype=float)
    x_scale = np.where(x_top - x_offset > 0, x_top - x_offset, 1.0)
    Xs = (X - x_offset) / x_scale

    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if not y_std > 0:
        logger.debug("Constant training outputs; fitting a flat model")
        return KrigingModel(Xs, np.zeros(n), np.zeros(m), 0.0, 0.0, cfg.nugget, x_offset, x_scale,
                            y_mean, 1.0, LIKELIHOOD_UNDEFINED, constant=True)
    ys = (y - y_mean) / y_std

    def negative_likelihood(genes: np.ndarray) -> np.ndarray:
        values = np.empty(genes.shape[0])
        for k, g in enumerate(genes):
            try:
                fact = _factorize_with_ladder(Xs, ys, 10.0 ** g, cfg.nugget, cfg.max_nugget)
                values[k] = -_likelihood_value(fact, n)
            except KrigingFitError:
                values[k] = -LIKELIHOOD_UNDEFINED
        return values

    lo = np.full(m, cfg.log10_theta_lower)
    hi = np.full(m, cfg.log10_theta_upper)
    best = run_single_objective_ga(negative_likelihood, lo, hi, _likelihood_ga_settings(cfg),
                                   rng=np.random.default_rng(cfg.seed))
    theta = 10.0 ** best.genes
    fact = _factorize_with_ladder(Xs, ys, theta, cfg.nugget, cfg.max_nugget)
    if fact.nugget > cfg.nugget:
        logger.debug(f"Nugget raised to {fact.nugget:g} for a stable factorization")
    return KrigingModel(Xs, ys, theta, fact.mu_hat, fact.sigma2_hat, fact.nugget, x_offset, x_scale,
                        y_mean, y_std, _likelihood_value(fact, n), _fact=fact)


def predict_batch(model: KrigingModel, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Predictive means and variances (original units) at the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if model.constant:
        return np.full(X.shape[0], model.y_mean), np.zeros(X.shape[0])
    fact = model._fact
    r = correlation_matrix(model.scale_inputs(X), model.X, model.theta)
    mean = model.mu_hat + r @ fact.residual_weights
    Rinv_r = cho_solve(fact.chol, r.T, check_finite=False)
    quad = np.sum(r.T * Rinv_r, axis=0)
    ones_term = (1.0 - fact.ones_weights @ r.T) ** 2 / fact.ones_dot
    variance = fact.sigma2_hat * (1.0 - quad + ones_term)
    variance = np.maximum(variance, 0.0)
    return model.y_mean + model.y_std * mean, model.y_std ** 2 * variance


def predict(model: KrigingModel, x: np.ndarray) -> Tuple[float, float]:
    """Predictive mean and variance at one design point."""
    mean, variance = predict_batch(model, np.asarray(x, dtype=float).reshape(1, -1))
    return float(mean[0]), float(variance[0])


def predict_all(models: Sequence[KrigingModel], X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Means and variances of every objective, each of shape (k, M)."""
    results = [predict_batch(model, X) for model in models]
    return np.column_stack([r[0] for r in results]), np.column_stack([r[1] for r in results])


def predict_means(models: Sequence[KrigingModel], X: np.ndarray) -> np.ndarray:
    return predict_all(models, X)[0]


def fit_models(X: np.ndarray, F: np.ndarray, cfg: LikelihoodGAConfig, seeds: Sequence[int],
               lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None,
               workers: int = 1) -> List[KrigingModel]:
    """One independent model per objective column; fits may run on a thread pool."""
    F = np.atleast_2d(F)
    configs = [cfg.model_copy(update={"seed": int(seed)}) for seed in seeds]

    def _fit(k: int) -> KrigingModel:
        return fit(X, F[:, k], configs[k], lower, upper)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_fit, range(F.shape[1])))
    return [_fit(k) for k in range(F.shape[1])]


def validation_rmse(model: KrigingModel, X: np.ndarray, y: np.ndarray) -> float:
    """Root-mean-square prediction error on held-out points."""
    mean, _ = predict_batch(model, X)
    return float(np.sqrt(np.mean((mean - np.asarray(y, dtype=float)) ** 2)))
