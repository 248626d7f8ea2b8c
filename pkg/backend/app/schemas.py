"""
Pydantic schemas for experiment configuration, result rows and API bodies.
"""

import math
from enum import Enum
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from app.services.rng import Distribution


class ExperimentKind(str, Enum):
    """Experiment pipelines the harness can run."""
    RENEWAL_COUNT = "renewal_count"
    MAX_LIMIT = "max_limit"
    KTH_ORDER = "kth_order"
    CTRW_SOJOURN = "ctrw_sojourn"
    CTRW_TWO_LARGEST = "ctrw_two_largest"
    CTRW_EXCURSION = "ctrw_excursion"
    FULL_DEPENDENCE_MAX = "full_dependence_max"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --- Model configuration ---

class DistributionConfig(StrictModel):
    """A positive law: exponential(rate), pareto(alpha) or deterministic(value)."""
    kind: Literal["exponential", "pareto", "deterministic"] = "exponential"
    param: float = Field(1.0, gt=0)

    def to_distribution(self) -> Distribution:
        return Distribution(self.kind, self.param)


class ModelConfig(StrictModel):
    """The joint law of (X, Y)."""
    dependence: Literal["independent", "identical", "ctrw_cycle"] = "independent"
    observation: DistributionConfig = Field(default_factory=DistributionConfig)
    alpha: float = Field(0.5, gt=0, lt=1)
    n_cal: int = Field(10**6, ge=10**6)


class ToleranceConfig(StrictModel):
    """Pass thresholds; every field can be overridden per experiment."""
    ks: float = Field(0.03, gt=0, le=1)
    ks_trend_slack: float = Field(0.01, ge=0)
    route_se: float = Field(3.0, gt=0)
    joint_abs: float = Field(0.03, gt=0)
    uniformity_p: float = Field(0.01, ge=0, lt=1)
    dkw_delta: float = Field(0.01, gt=0, lt=1)


# --- Experiment configuration ---

class ExperimentConfig(StrictModel):
    """One experiment: a pipeline, a model, horizons and replication settings."""
    kind: ExperimentKind
    model: ModelConfig = Field(default_factory=ModelConfig)
    t_grid: List[float]
    reps: int = Field(..., ge=100)
    seed: int = Field(0, ge=0, lt=2**64)
    out: str = "results"
    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)
    k: int = Field(2, ge=1)
    fidelity: Literal["cycle", "step", "both"] = "cycle"
    limit_check: bool = True
    quantile_pairs: List[Tuple[float, float]] = Field(default_factory=lambda: [(0.9, 0.5), (0.95, 0.75)])
    w_bank_size: Optional[int] = Field(None, ge=1000)
    v_bank_size: Optional[int] = Field(None, ge=10**4)
    subord_tol: Optional[float] = Field(None, gt=0)
    diagnostics: bool = False
    diagnostic_samples: int = Field(10**6, ge=10**4)
    tail_q: Optional[float] = Field(None, gt=0.9, lt=1)

    @field_validator("t_grid")
    @classmethod
    def _check_t_grid(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("t_grid must not be empty")
        if any(t <= 0 for t in v):
            raise ValueError("t_grid entries must be positive")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("t_grid must be strictly increasing")
        return v

    @field_validator("quantile_pairs")
    @classmethod
    def _check_pairs(cls, v: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        for p1, p2 in v:
            if not 0.0 < p2 < p1 < 1.0:
                raise ValueError(f"quantile pair ({p1}, {p2}) must satisfy 0 < p2 < p1 < 1")
        return v

    @model_validator(mode="after")
    def _check_kind_model(self) -> "ExperimentConfig":
        kind = self.kind
        dependence = self.model.dependence
        if kind in (ExperimentKind.CTRW_SOJOURN, ExperimentKind.CTRW_EXCURSION) and dependence != "ctrw_cycle":
            raise ValueError(f"{kind.value} needs model.dependence = ctrw_cycle")
        if kind == ExperimentKind.FULL_DEPENDENCE_MAX and dependence != "identical":
            raise ValueError("full_dependence_max needs model.dependence = identical")
        if kind in (ExperimentKind.MAX_LIMIT, ExperimentKind.KTH_ORDER) and dependence == "ctrw_cycle":
            raise ValueError(f"{kind.value} needs a Pareto interarrival model (independent or identical)")
        if dependence == "ctrw_cycle" and self.model.observation.kind == "deterministic" and kind != ExperimentKind.CTRW_EXCURSION:
            raise ValueError("unit waits have no continuous MDA; only ctrw_excursion accepts them")
        return self


# --- Results ---

class ResultRow(BaseModel):
    """One comparison of an empirical statistic against its limit."""
    kind: str
    t: float
    reps: int
    statistic: str
    empirical: float
    limit: float
    ks: float
    dkw_eps: float
    passed: bool
    wall_time: float = 0.0

    @field_serializer("empirical", "limit", "ks", "dkw_eps", when_used="json")
    def _finite_or_null(self, value: float) -> Optional[float]:
        return value if math.isfinite(value) else None


RESULT_COLUMNS = ["kind", "t", "reps", "statistic", "empirical", "limit", "ks", "dkw_eps", "passed"]
TIMING_COLUMNS = ["kind", "t", "statistic", "wall_time"]


# --- API bodies ---

class LimitValue(BaseModel):
    value: float
    error_estimate: float
    route: str


class RunResponse(BaseModel):
    rows: List[ResultRow]
    all_passed: bool
