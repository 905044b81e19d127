import json
import math
from pathlib import Path
from typing import Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

import config
from core.errors import ConfigError

Vector3 = Tuple[float, float, float]


class MaterialParams(BaseModel):
    """Physical coefficients of the Biot system. Units: mm, s, mPa."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kappa: float = Field(config.KAPPA, gt=0)
    M: float = Field(config.BIOT_MODULUS, gt=0)
    alpha: float = Field(config.BIOT_COEFFICIENT, gt=0)
    E: float = Field(config.YOUNG_MODULUS, gt=0)
    nu: float = Field(config.POISSON_RATIO, gt=-1.0, lt=0.5)
    rho_f: float = config.FLUID_DENSITY
    g: Vector3 = config.GRAVITY
    dim: int = Field(config.DIMENSION, ge=2, le=3)

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))

    @property
    def K_dr(self) -> float:
        # drained bulk modulus
        return 0.5 * self.dim * (self.mu + self.lam)

    @property
    def beta_FS(self) -> float:
        return self.alpha ** 2 / self.K_dr

    @model_validator(mode="after")
    def _check_lame(self):
        if self.lam <= 0:
            raise ValueError(f"nu={self.nu} gives a non-positive lambda")
        return self


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    tau: float = Field(config.TIME_STEP, gt=0)
    T: float = Field(config.FINAL_TIME, gt=0)
    eps_a: float = Field(config.EPS_ABSOLUTE, gt=0)
    eps_r: float = Field(config.EPS_RELATIVE, gt=0)
    max_iters: int = Field(config.MAX_FIXED_STRESS_ITERS, ge=1)
    matrix_quad_degree: int = Field(config.MATRIX_QUAD_DEGREE, ge=1)
    load_quad_degree: int = Field(config.LOAD_QUAD_DEGREE, ge=1)
    linear_tol: float = Field(config.LINEAR_TOL, gt=0)
    linear_method: Literal["direct", "iterative"] = "direct"
    singularity_removal: bool = True

    @model_validator(mode="after")
    def _check_steps(self):
        ratio = self.T / self.tau
        if abs(ratio - round(ratio)) > 1e-9 * max(ratio, 1.0) or round(ratio) < 1:
            raise ValueError(f"T={self.T} is not an integer multiple of tau={self.tau}")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.tau))


class RunConfig(BaseModel):
    """Flat JSON document read by the ``solve`` subcommand."""

    model_config = ConfigDict(extra="forbid")

    # material
    kappa: float = config.KAPPA
    M: float = config.BIOT_MODULUS
    alpha: float = config.BIOT_COEFFICIENT
    E: float = config.YOUNG_MODULUS
    nu: float = config.POISSON_RATIO
    rho_f: float = config.FLUID_DENSITY
    g: Vector3 = config.GRAVITY
    # solver
    tau: float = config.TIME_STEP
    T: float = config.FINAL_TIME
    eps_a: float = config.EPS_ABSOLUTE
    eps_r: float = config.EPS_RELATIVE
    max_iters: int = config.MAX_FIXED_STRESS_ITERS
    matrix_quad_degree: int = config.MATRIX_QUAD_DEGREE
    load_quad_degree: int = config.LOAD_QUAD_DEGREE
    linear_tol: float = config.LINEAR_TOL
    linear_method: Literal["direct", "iterative"] = "direct"
    singularity_removal: bool = True
    # problem
    segment_a: Vector3 = config.SEGMENT_A
    segment_b: Vector3 = config.SEGMENT_B
    mesh_size: int = Field(config.MESH_SIZE, ge=1, le=config.MAX_MESH_DIVISIONS)
    output: str | None = None

    @field_validator("segment_b")
    @classmethod
    def _distinct_endpoints(cls, b, info):
        a = info.data.get("segment_a")
        if a is not None and math.dist(a, b) == 0.0:
            raise ValueError("segment endpoints coincide")
        return b

    def material(self) -> MaterialParams:
        return MaterialParams(**self.model_dump(include=set(MaterialParams.model_fields) - {"dim"}))

    def solver(self) -> SolverConfig:
        return SolverConfig(**self.model_dump(include=set(SolverConfig.model_fields)))


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"Malformed config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"Config {path} must hold a JSON object")
    try:
        run = RunConfig.model_validate(raw)
        # surface material/solver constraint violations at load time
        run.material()
        run.solver()
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e
    return run
