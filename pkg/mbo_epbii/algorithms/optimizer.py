"""
Optimization loop combining the Kriging surrogates, front estimation,
reference-vector adaptation, EPBII maximization and sample selection.
Each iteration adds n_add truly evaluated samples until n_max is reached.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..core.config import IndicatorConfig, OptimizerConfig, get_settings
from ..core.exceptions import EvaluationError, InputDomainError
from ..core.utils import Stream, component_rng, component_seed, write_matrix_csv
from ..services import metrics
from ..services.doe import latin_hypercube, scale_to_bounds
from ..services.kriging import KrigingModel, fit_models, predict_batch, predict_means, validation_rmse
from ..services.problems import Problem
from .ea import run_nsga3, run_single_objective_ga
from .epbii import (EPBIIEvaluator, compute_theta_ref, draw_sample_block, maximize_epbii,
                    reference_pbi)
from .pareto import (NadirUtopia, epsilon_dominance_filter, estimate_nadir_utopia, nondominated_mask,
                     two_layer_sld, weakly_nondominated_mask)
from .selection import build_candidate_table, initial_niche_state, select_additional
from .srva import ReferenceVectorSet, adapt_reference_vectors, sld_reference_vectors


class SampleArchive:
    """Truly evaluated samples; grows monotonically."""

    def __init__(self, n_var: int, n_obj: int):
        self.X = np.zeros((0, n_var))
        self.F = np.zeros((0, n_obj))

    def __len__(self) -> int:
        return self.X.shape[0]

    def add(self, X: np.ndarray, F: np.ndarray) -> None:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.atleast_2d(np.asarray(F, dtype=float))
        if X.shape[0] != F.shape[0]:
            raise InputDomainError("one objective vector per design point is required")
        bad = ~np.all(np.isfinite(F), axis=1)
        if bad.any():
            raise EvaluationError(f"non-finite objectives at design(s) {X[bad].tolist()}")
        self.X = np.vstack([self.X, X])
        self.F = np.vstack([self.F, F])

    def nds_mask(self) -> np.ndarray:
        return nondominated_mask(self.F)

    @property
    def objective_range(self) -> np.ndarray:
        return self.F.max(axis=0) - self.F.min(axis=0)


@dataclass(frozen=True)
class EstimatedFront:
    """Surrogate non-dominated designs, their objectives and the derived normalization."""

    X_hat: np.ndarray
    F_hat: np.ndarray
    filtered: np.ndarray
    nu: NadirUtopia

    def __len__(self) -> int:
        return self.F_hat.shape[0]


def estimate_front(models: Sequence[KrigingModel], lower: np.ndarray, upper: np.ndarray,
                   cfg: OptimizerConfig, iteration: int = 0,
                   fallback_range: Optional[np.ndarray] = None) -> EstimatedFront:
    """NSGA-III on the surrogate means plus one single-objective GA per objective.

    The merged pool is reduced to its weakly non-dominated members; the
    epsilon-dominance survivors define the nadir and utopia points.
    """
    n_obj = len(models)
    ref_dirs = two_layer_sld(n_obj, cfg.nsga3_h1, cfg.nsga3_h2).vectors

    def surrogate(X: np.ndarray) -> np.ndarray:
        return predict_means(models, X)

    X_front, F_front = run_nsga3(surrogate, lower, upper, ref_dirs, cfg.nsga3,
                                 component_rng(cfg.seed, Stream.NSGA3, iteration))
    extremes = []
    for k, model in enumerate(models):
        start = X_front[np.argmin(F_front[:, k])][None, :] if X_front.shape[0] else None
        best = run_single_objective_ga(lambda X, m=model: predict_batch(m, X)[0], lower, upper, cfg.extreme_ga,
                                       component_rng(cfg.seed, Stream.EXTREME_GA, iteration, k), initial=start)
        extremes.append(best.genes)
    pool_X = np.vstack([X_front, np.array(extremes)])
    pool_X = pool_X[np.sort(np.unique(pool_X, axis=0, return_index=True)[1])]
    pool_F = surrogate(pool_X)
    distinct = np.sort(np.unique(pool_F, axis=0, return_index=True)[1])
    pool_X, pool_F = pool_X[distinct], pool_F[distinct]
    keep = weakly_nondominated_mask(pool_F)
    X_hat, F_hat = pool_X[keep], pool_F[keep]
    filtered = epsilon_dominance_filter(F_hat, cfg.epsilon)
    nu = estimate_nadir_utopia(filtered, cfg.epsilon, fallback_range, front=F_hat)
    return EstimatedFront(X_hat, F_hat, filtered, nu)


@dataclass
class IterationRecord:
    iteration: int
    n: int
    wall_seconds: float
    hypervolume: float
    igd_plus: Optional[float]
    igd: Optional[float]
    nds_indices: List[int]
    reference_source: Optional[str] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)


@dataclass
class RunRecord:
    """Everything one seeded run produced; written once as JSON."""

    problem: str
    n_obj: int
    n_var: int
    seed: int
    reference_mode: str
    config: Dict[str, Any]
    hv_reference: List[float]
    iterations: List[IterationRecord] = field(default_factory=list)
    X: List[List[float]] = field(default_factory=list)
    F: List[List[float]] = field(default_factory=list)

    @property
    def final(self) -> IterationRecord:
        return self.iterations[-1]

    def nds_objectives(self, iteration: int = -1) -> np.ndarray:
        F = np.asarray(self.F, dtype=float)
        return F[self.iterations[iteration].nds_indices]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        data = dict(data)
        data["iterations"] = [IterationRecord(**it) for it in data.get("iterations", [])]
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    def deterministic_view(self) -> Dict[str, Any]:
        """The record without wall-clock fields."""
        data = self.to_dict()
        for it in data["iterations"]:
            it.pop("wall_seconds", None)
        return data

    def write(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")


def _model_seeds(master_seed: int, iteration: int, n_obj: int) -> List[int]:
    return [int(component_seed(master_seed, Stream.LIKELIHOOD_GA, iteration, k).generate_state(1)[0])
            for k in range(n_obj)]


class MBOOptimizer:
    """Surrogate-based many-objective optimizer for one problem and configuration."""

    def __init__(self, problem: Problem, cfg: OptimizerConfig, indicators: Optional[IndicatorConfig] = None,
                 reference_set: Optional[np.ndarray] = None, dump_dir: Optional[Union[str, Path]] = None):
        self.problem = problem
        self.cfg = cfg.resolved(problem.n_obj, problem.n_var)
        self.indicators = indicators or IndicatorConfig()
        self.reference_set = reference_set
        self.dump_dir = Path(dump_dir) if dump_dir is not None and get_settings().debug else None
        if self.indicators.hv_reference is not None:
            self.hv_reference = np.asarray(self.indicators.hv_reference, dtype=float)
        else:
            self.hv_reference = metrics.default_hv_reference(problem.name, problem.n_obj)
        if self.hv_reference.shape != (problem.n_obj,):
            raise InputDomainError(f"hypervolume reference must have {problem.n_obj} components")
        self.logger = logging.getLogger(__name__)

    def _measure(self, archive: SampleArchive, iteration: int, started: float,
                 source: Optional[str], diagnostics: Dict[str, Any]) -> IterationRecord:
        mask = archive.nds_mask()
        nds = archive.F[mask]
        hv = metrics.hypervolume_with_config(nds, self.hv_reference, self.indicators,
                                             lower=self.problem.objective_lower_bound)
        igd_plus = igd = None
        if self.reference_set is not None:
            igd_plus = metrics.igd_plus(nds, self.reference_set)
            igd = metrics.igd(nds, self.reference_set)
        record = IterationRecord(iteration, len(archive), time.perf_counter() - started, hv, igd_plus, igd,
                                 np.flatnonzero(mask).tolist(), source, diagnostics)
        self.logger.info(f"{self.problem.name} M={self.problem.n_obj} seed={self.cfg.seed} "
                         f"iteration {iteration}: n={record.n} HV={hv:.6g}"
                         + (f" IGD+={igd_plus:.6g}" if igd_plus is not None else ""))
        return record

    def _reference_vectors(self, front: EstimatedFront, F_norm: np.ndarray, iteration: int) -> ReferenceVectorSet:
        cfg = self.cfg
        rng = component_rng(cfg.seed, Stream.KMEANS, iteration)
        if cfg.reference_mode == "sld":
            return sld_reference_vectors(self.problem.n_obj, cfg.sld_h1, cfg.sld_h2, cfg.n_add, rng)
        return adapt_reference_vectors(front.nu.normalize(front.F_hat), F_norm, cfg.n_ref, cfg.n_add, rng,
                                       cfg.sld_h1, cfg.sld_h2)

    def _dump(self, iteration: int, ref_set: ReferenceVectorSet, ctx, values: np.ndarray) -> None:
        if self.dump_dir is None:
            return
        folder = self.dump_dir / "debug"
        write_matrix_csv(folder / f"reference_vectors_{iteration:03d}.csv", ref_set.vectors, [ref_set.labels])
        write_matrix_csv(folder / f"territories_{iteration:03d}.csv",
                         np.column_stack([ctx.g_ref, ctx.occupancy, values]))

    def step(self, archive: SampleArchive, iteration: int) -> Dict[str, Any]:
        """One iteration: fit, estimate, adapt, maximize, select, evaluate."""
        cfg = self.cfg
        problem = self.problem
        lower, upper = problem.lower, problem.upper
        n_pick = min(cfg.n_add, cfg.n_max - len(archive))

        models = fit_models(archive.X, archive.F, cfg.likelihood_ga,
                            _model_seeds(cfg.seed, iteration, problem.n_obj), lower, upper, cfg.workers)
        front = estimate_front(models, lower, upper, cfg, iteration, archive.objective_range)
        nu = front.nu
        F_norm = nu.normalize(archive.F)

        ref_set = self._reference_vectors(front, F_norm, iteration)
        ctx = reference_pbi(F_norm, ref_set, compute_theta_ref(ref_set, cfg.theta_pbi))
        mc = draw_sample_block(cfg.mc_samples, problem.n_obj, component_rng(cfg.seed, Stream.MC_BLOCK, iteration))
        evaluator = EPBIIEvaluator(models, nu, ref_set, ctx, mc)
        X_c, values = maximize_epbii(evaluator, front.X_hat, nu.normalize(front.F_hat), lower, upper, cfg.moead,
                                     component_rng(cfg.seed, Stream.MOEAD, iteration),
                                     component_rng(cfg.seed, Stream.FALLBACK, iteration))

        table = build_candidate_table(X_c, values, models, ref_set.labels)
        state = initial_niche_state(F_norm[archive.nds_mask()], ref_set, ctx)
        chosen = select_additional(table, n_pick, state, ctx, ref_set, nu, lower, upper, archive.X,
                                   component_rng(cfg.seed, Stream.SELECTION, iteration))

        F_new = problem.evaluate_batch(chosen.X)
        rmse = [validation_rmse(model, chosen.X, F_new[:, k]) for k, model in enumerate(models)]
        archive.add(chosen.X, F_new)
        self._dump(iteration, ref_set, ctx, values)
        return {
            "reference_source": ref_set.source,
            "theta_ref": ctx.theta_ref,
            "d_min": ctx.d_min,
            "nadir_utopia": nu.to_dict(),
            "estimated_front_size": len(front),
            "filtered_front_size": int(front.filtered.shape[0]),
            "selected_epbii": table.epbii[chosen.indices].tolist(),
            "selected_fitness": chosen.fitness.tolist(),
            "jittered": chosen.jittered,
            "models": [model.summary() for model in models],
            "validation_rmse": rmse,
        }

    def run(self) -> RunRecord:
        cfg = self.cfg
        problem = self.problem
        started = time.perf_counter()
        archive = SampleArchive(problem.n_var, problem.n_obj)
        design = latin_hypercube(cfg.n_init, problem.n_var, component_rng(cfg.seed, Stream.LHS))
        X0 = scale_to_bounds(design, problem.lower, problem.upper)
        archive.add(X0, problem.evaluate_batch(X0))

        record = RunRecord(problem.name, problem.n_obj, problem.n_var, cfg.seed, cfg.reference_mode,
                           cfg.model_dump(), self.hv_reference.tolist())
        record.iterations.append(self._measure(archive, 0, started, None, {}))
        iteration = 0
        while len(archive) < cfg.n_max:
            iteration += 1
            diagnostics = self.step(archive, iteration)
            record.iterations.append(
                self._measure(archive, iteration, started, diagnostics.pop("reference_source"), diagnostics))
        record.X = archive.X.tolist()
        record.F = archive.F.tolist()
        if self.dump_dir is not None:
            write_matrix_csv(self.dump_dir / "debug" / "archive.csv", archive.F)
        return record


def run(problem: Problem, cfg: OptimizerConfig, indicators: Optional[IndicatorConfig] = None,
        reference_set: Optional[np.ndarray] = None,
        dump_dir: Optional[Union[str, Path]] = None) -> RunRecord:
    """Run the optimizer to its evaluation budget and return the full record."""
    return MBOOptimizer(problem, cfg, indicators, reference_set, dump_dir).run()
