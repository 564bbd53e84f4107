"""
Configuration module for the optimization toolkit.
Manages environment settings and the validated run / experiment models.
"""

import logging
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from scipy.special import comb

from .exceptions import ConfigError

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Process settings with environment variable support (prefix MBO_)."""

    # Worker pool
    workers: int = 1

    # Logging
    log_level: str = "INFO"
    debug: bool = False

    # Reference-set cache
    pf_cache_dir: str = "pf_cache"

    model_config = SettingsConfigDict(
        env_prefix="MBO_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get the current settings instance."""
    return settings


def sld_count(n_obj: int, h1: int, h2: int = 0) -> int:
    """Number of vectors of a (two-layer) simplex lattice design."""
    count = int(comb(h1 + n_obj - 1, n_obj - 1, exact=True))
    if h2 > 0:
        count += int(comb(h2 + n_obj - 1, n_obj - 1, exact=True))
    return count


# M -> (N_ref, EPBII SLD factors, NSGA-III SLD factors)
PROTOCOL_DEFAULTS = {
    3: (91, (12, 0), (30, 0)),
    6: (112, (3, 3), (6, 5)),
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LikelihoodGAConfig(_Strict):
    """Genetic algorithm used to maximize the concentrated log-likelihood."""

    population_size: int = Field(50, ge=4)
    generations: int = Field(50, ge=1)
    log10_theta_lower: float = -3.0
    log10_theta_upper: float = 3.0
    eta_c: float = Field(15.0, gt=0)
    p_c: float = Field(0.9, ge=0, le=1)
    eta_m: float = Field(20.0, gt=0)
    p_m: Optional[float] = Field(None, ge=0, le=1)
    elitism: int = Field(1, ge=0)
    seed: int = 0
    nugget: float = Field(1e-10, ge=0)
    max_nugget: float = Field(1e-4, gt=0)

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.log10_theta_lower >= self.log10_theta_upper:
            raise ValueError("log10_theta_lower must be smaller than log10_theta_upper")
        if self.nugget > self.max_nugget:
            raise ValueError("nugget must not exceed max_nugget")
        return self


class EAConfig(_Strict):
    """Settings shared by the internal evolutionary engines."""

    population_size: int = Field(100, ge=4)
    generations: int = Field(100, ge=0)
    eta_c: float = Field(15.0, gt=0)
    p_c: float = Field(1.0, ge=0, le=1)
    eta_m: float = Field(20.0, gt=0)
    p_m: Optional[float] = Field(None, ge=0, le=1)
    elitism: int = Field(1, ge=0)
    seed: int = 0

    # MOEA/D extras
    neighborhood_size: Optional[int] = Field(None, ge=1)
    delta: float = Field(0.9, ge=0, le=1)
    replacement_cap: int = Field(2, ge=1)

    def mutation_probability(self, n_var: int) -> float:
        return self.p_m if self.p_m is not None else 1.0 / n_var


class OptimizerConfig(_Strict):
    """Parameters of one optimization run; defaults follow the benchmark protocol."""

    n_init: int = Field(30, ge=2)
    n_max: int = Field(300, ge=2)
    n_add: int = Field(10, ge=1)
    n_ref: Optional[int] = Field(None, ge=1)
    reference_mode: Literal["adaptive", "sld"] = "adaptive"

    # SLD factors of the EPBII reference vectors (baseline mode and SRVA fallback)
    sld_h1: Optional[int] = Field(None, ge=1)
    sld_h2: Optional[int] = Field(None, ge=0)

    # Fixed reference vectors of NSGA-III
    nsga3_h1: Optional[int] = Field(None, ge=1)
    nsga3_h2: Optional[int] = Field(None, ge=0)

    nsga3: EAConfig = Field(default_factory=lambda: EAConfig(generations=200, p_c=1.0))
    extreme_ga: EAConfig = Field(default_factory=lambda: EAConfig(population_size=100, generations=100))
    moead: EAConfig = Field(default_factory=lambda: EAConfig(generations=50, p_c=1.0))
    likelihood_ga: LikelihoodGAConfig = Field(default_factory=LikelihoodGAConfig)

    epsilon: float = Field(0.01, gt=0)
    theta_pbi: float = Field(1.0, ge=0)
    mc_samples: int = Field(100, ge=1)
    seed: int = 0
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_budget(self):
        if self.n_init > self.n_max:
            raise ValueError("n_init must not exceed n_max")
        return self

    def resolved(self, n_obj: int, n_var: int) -> "OptimizerConfig":
        """Fill M-dependent defaults and check the cross-field invariants."""
        updates = {}
        defaults = PROTOCOL_DEFAULTS.get(n_obj)
        if self.sld_h1 is None:
            if defaults is None:
                raise ConfigError(f"no default SLD factors for M={n_obj}", field="sld_h1")
            updates["sld_h1"], updates["sld_h2"] = defaults[1]
        elif self.sld_h2 is None:
            updates["sld_h2"] = 0
        if self.nsga3_h1 is None:
            if defaults is None:
                raise ConfigError(f"no default NSGA-III SLD factors for M={n_obj}", field="nsga3_h1")
            updates["nsga3_h1"], updates["nsga3_h2"] = defaults[2]
        elif self.nsga3_h2 is None:
            updates["nsga3_h2"] = 0
        cfg = self.model_copy(update=updates)

        sld_n = sld_count(n_obj, cfg.sld_h1, cfg.sld_h2)
        if cfg.n_ref is None:
            cfg = cfg.model_copy(update={"n_ref": sld_n})
        elif cfg.reference_mode == "sld" and cfg.n_ref != sld_n:
            raise ConfigError(
                f"n_ref={cfg.n_ref} does not match the SLD ({cfg.sld_h1}, {cfg.sld_h2}) count {sld_n}",
                field="n_ref")

        if cfg.n_add > cfg.n_ref:
            raise ConfigError(f"n_add={cfg.n_add} exceeds n_ref={cfg.n_ref}", field="n_add")
        nsga3_n = sld_count(n_obj, cfg.nsga3_h1, cfg.nsga3_h2)
        if 5 * cfg.n_ref > nsga3_n:
            raise ConfigError(
                f"NSGA-III uses {nsga3_n} fixed reference vectors but at least five times "
                f"n_ref={cfg.n_ref} ({5 * cfg.n_ref}) are required to estimate the front",
                field="n_ref")
        if cfg.n_init < n_var + 2:
            logger.warning(f"n_init={cfg.n_init} is below m+2={n_var + 2}; Kriging fits may be poor")
        return cfg


class IndicatorConfig(_Strict):
    """Quality-indicator settings; unset fields take the per-problem defaults."""

    hv_reference: Optional[List[float]] = None
    hv_method: Literal["auto", "exact", "monte-carlo"] = "auto"
    hv_mc_samples: int = Field(1_000_000, ge=1)
    hv_mc_seed: int = 0
    exact_max_objectives: int = Field(4, ge=2)
    igd_reference_count: Optional[int] = Field(None, ge=1)
    igd_reference_seed: int = 2021


class CaseConfig(_Strict):
    """One experiment case: a problem, a mode and the seeds to run it with."""

    problem: str
    n_obj: int = Field(ge=2)
    n_var: int = Field(10, ge=2)
    mode: Literal["srva", "sld-baseline"] = "srva"
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    indicators: IndicatorConfig = Field(default_factory=IndicatorConfig)
    seeds: List[int] = Field(min_length=1)

    @field_validator("problem")
    @classmethod
    def _lower_name(cls, value: str) -> str:
        return value.strip().lower()

    @field_validator("seeds")
    @classmethod
    def _distinct_seeds(cls, value: List[int]) -> List[int]:
        if len(set(value)) != len(value):
            raise ValueError("seeds must be distinct")
        return value

    @model_validator(mode="after")
    def _check_sizes(self):
        if self.n_var < self.n_obj:
            raise ValueError("n_var must be at least n_obj")
        return self

    @property
    def case_id(self) -> str:
        return f"{self.problem}_m{self.n_obj}_{self.mode}"

    def optimizer_config(self, seed: int) -> OptimizerConfig:
        """Resolved optimizer configuration for one seed of this case."""
        mode = "adaptive" if self.mode == "srva" else "sld"
        cfg = self.optimizer.model_copy(update={"reference_mode": mode, "seed": seed})
        return cfg.resolved(self.n_obj, self.n_var)


class ExperimentPlan(_Strict):
    """A validated batch of cases written to one output directory."""

    version: Literal[1]
    output_dir: str
    workers: Optional[int] = Field(None, ge=1)
    cases: List[CaseConfig] = Field(min_length=1)

    @model_validator(mode="after")
    def _unique_cases(self):
        ids = [case.case_id for case in self.cases]
        if len(set(ids)) != len(ids):
            raise ValueError("cases must differ in (problem, n_obj, mode)")
        return self
