"""
Pydantic schemas for estimator configuration, simulation specs and reports.
"""
import json
from enum import Enum
from typing import Any, Dict, List, Optional

from jsonschema import ValidationError, validate
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import config
from .errors import ReportSchemaError


class Design(str, Enum):
    BARRERA_YOHAI = "barrera-yohai"
    MIXED_GOOD_BAD = "mixed-good-bad"
    MIXED_BAD = "mixed-bad"


class PtsConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    cutoff_c: float = Field(config.DEFAULT_CUTOFF, gt=0, description="Penalty cut-off c")
    alpha_greed: float = Field(config.DEFAULT_ALPHA_GREED, ge=0, le=1,
                               description="Construction randomness (0 = purely greedy)")
    max_iter: int = Field(config.DEFAULT_MAX_ITER, ge=1, description="Fast-PTS iterations")
    seed: int = Field(config.DEFAULT_SEED, ge=0, description="Master RNG seed")
    epsilon_floor: float = Field(config.DEFAULT_EPSILON_FLOOR, gt=0, description="Smallest allowed penalty")
    t_reinclude: float = Field(config.DEFAULT_T_REINCLUDE, ge=0, description="Reinclusion threshold on |t_i|")
    lts_starts: int = Field(config.DEFAULT_LTS_STARTS, ge=1)
    mcd_starts: int = Field(config.DEFAULT_MCD_STARTS, ge=1)
    lts_coverage: Optional[int] = Field(None, ge=1, description="LTS coverage for the scale (None = floor((n+p+1)/2))")
    threads: Optional[int] = Field(None, ge=0, description="Worker threads (None reads PTS_THREADS)")


class SimSpec(BaseModel):
    """Contaminated regression design for Monte Carlo runs."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(100, ge=2)
    p: int = Field(2, ge=2, description="Number of coefficients: the intercept plus at least one predictor")
    contamination: float = Field(0.1, ge=0, lt=0.5, description="Fraction of contaminated rows")
    slope: float = Field(1.0, description="Outlier response is slope * leverage position")
    outlier_position: float = Field(100.0, gt=0, description="First predictor of every contaminated row")
    error_sigma: float = Field(1.0, gt=0)
    replications: int = Field(50, ge=1)
    seed: int = Field(config.DEFAULT_SEED, ge=0)
    x_outliers: int = Field(6, ge=0, description="Mixed design: bad leverage rows")
    good_leverage: int = Field(4, ge=0, description="Mixed design: good leverage rows")
    y_outliers: int = Field(6, ge=0, description="Mixed design: vertical outliers")

    @model_validator(mode='after')
    def check_dimensions(self):
        if self.p >= self.n:
            raise ValueError(f"p={self.p} must be smaller than n={self.n}")
        return self

    @property
    def beta_true(self) -> List[float]:
        return [0.0] * self.p


# Report schemas
class PenaltySummary(BaseModel):
    min: float
    median: float
    max: float


class FitReport(BaseModel):
    schema_version: str = config.REPORT_SCHEMA_VERSION
    n: int
    p: int
    coefficients: List[float]
    sigma_hat: float
    s_hat: Optional[float] = None
    penalties: PenaltySummary
    clean: List[int] = Field(..., description="1-based labels of clean rows")
    outliers: List[int] = Field(..., description="1-based labels of flagged rows")
    reincluded: List[int]
    objective: float
    search_objective: Optional[float] = None
    iterations: int
    seed: int
    config: Dict[str, Any]
    wall_seconds: Optional[float] = None


class BenchmarkRow(BaseModel):
    case: str
    n: int
    p: int
    detected: List[int]
    true_outliers: List[int]
    identified_pct: float
    swamping_pct: float
    cpu_seconds: Optional[float] = None


class BenchmarkReport(BaseModel):
    schema_version: str = config.REPORT_SCHEMA_VERSION
    seed: int
    rows: List[BenchmarkRow]


class SimulationSummary(BaseModel):
    schema_version: str = config.REPORT_SCHEMA_VERSION
    design: Design
    spec: Dict[str, Any]
    replications: int
    wrong_pct: float
    mse: float
    mse_per_coefficient: List[float]
    mean_estimate: List[float]
    failures: int = 0
    mean_cpu_seconds: Optional[float] = None


class OracleComparison(BaseModel):
    schema_version: str = config.REPORT_SCHEMA_VERSION
    n: int
    p: int
    exact_objective: float
    fast_objective: float
    gap: float
    relative_gap: float
    exact_outliers: List[int]
    fast_outliers: List[int]
    exact_seconds: Optional[float] = None
    fast_seconds: Optional[float] = None


def report_json(report: BaseModel) -> str:
    """
    Serialize a report deterministically after validating it against its JSON schema.

    Raises:
        ReportSchemaError: if the dumped report does not match the model schema
    """
    payload = report.model_dump(mode='json')
    schema = type(report).model_json_schema(mode='serialization')
    try:
        validate(payload, schema)
    except ValidationError as e:
        raise ReportSchemaError(f"{type(report).__name__} does not match its schema: {e.message}") from e
    return json.dumps(payload, sort_keys=True, indent=2)
