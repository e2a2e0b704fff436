from typing import List, Literal, Optional

import numpy as np
from pydantic import Field, field_validator, model_validator

from membrane.domain.base import StrictSchema
from membrane.domain.params import ModelParams, check_psd, check_spd
from membrane.domain.potential import (
    LogExtendedPotential,
    MoreauYosidaPotential,
    PolynomialPotential,
)

OutputFormat = Literal["csv", "pgm", "vtk", "raw"]


def _split_list(v):
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


class MeshSection(StrictSchema):
    n: int = Field(ge=4)


class TimeSection(StrictSchema):
    tau: float = Field(gt=0)
    t_end: float = Field(gt=0)

    @model_validator(mode="after")
    def _horizon_covers_one_step(self):
        if self.t_end < self.tau:
            raise ValueError("t_end must be >= tau")
        return self


class ParamsSection(StrictSchema):
    eps: float = Field(gt=0)
    kappa: float = Field(gt=0)
    sigma: Optional[float] = Field(default=None, gt=0)
    lambda_: Optional[float] = Field(default=None, ge=0, alias="lambda")
    G: Optional[List[float]] = None
    L: Optional[List[float]] = None

    @field_validator("G", "L", mode="before")
    @classmethod
    def _split_matrix(cls, v):
        return _split_list(v)

    @field_validator("G", "L")
    @classmethod
    def _four_entries(cls, v):
        if v is not None and len(v) != 4:
            raise ValueError("2x2 matrix needs 4 comma-separated entries (row-major)")
        return v

    @field_validator("G")
    @classmethod
    def _g_spd(cls, v):
        if v is not None:
            check_spd(np.array(v).reshape(2, 2), "G")
        return v

    @field_validator("L")
    @classmethod
    def _l_psd(cls, v):
        if v is not None:
            check_psd(np.array(v).reshape(2, 2), "L")
        return v

    @model_validator(mode="after")
    def _one_coefficient_form(self):
        isotropic = self.sigma is not None or self.lambda_ is not None
        anisotropic = self.G is not None or self.L is not None
        if isotropic and anisotropic:
            raise ValueError("give either sigma/lambda or G/L, not both")
        if isotropic and (self.sigma is None or self.lambda_ is None):
            raise ValueError("isotropic parameters need both sigma and lambda")
        if anisotropic and (self.G is None or self.L is None):
            raise ValueError("anisotropic parameters need both G and L")
        if not isotropic and not anisotropic:
            raise ValueError("missing sigma/lambda or G/L")
        return self

    def matrices(self):
        if self.sigma is not None:
            return self.sigma * np.eye(2), self.lambda_ * np.eye(2)
        return np.array(self.G).reshape(2, 2), np.array(self.L).reshape(2, 2)


class PotentialSection(StrictSchema):
    variant: Literal["polynomial", "log_extended", "moreau_yosida"] = "log_extended"
    a4: float = Field(default=1.0, gt=0)
    a2: float = Field(default=2.0, gt=0)
    a0: float = 0.0
    mu0: float = 0.0
    theta: float = Field(default=4.0, gt=0)
    theta_c: float = Field(default=5.0, gt=0)
    delta: float = Field(default=0.02, gt=0, lt=1)
    lam: float = Field(default=0.01, gt=0)

    @model_validator(mode="after")
    def _temperatures_ordered(self):
        if self.variant != "polynomial" and not self.theta < self.theta_c:
            raise ValueError("log potential needs 0 < theta < theta_c")
        return self

    def to_spec(self):
        if self.variant == "polynomial":
            return PolynomialPotential(a4=self.a4, a2=self.a2, a0=self.a0, mu0=self.mu0)
        base = LogExtendedPotential(
            theta=self.theta, theta_c=self.theta_c, mu0=self.mu0, delta=self.delta
        )
        if self.variant == "log_extended":
            return base
        return MoreauYosidaPotential(lam=self.lam, base=base)


class InitSection(StrictSchema):
    mean_u: float
    amplitude: float = Field(ge=0)
    seed: int = Field(ge=0)
    h0_const: float = 0.0


class SolverSection(StrictSchema):
    """Per-run overrides; unset values fall back to the process settings."""

    newton_tol: Optional[float] = Field(default=None, gt=0)
    minres_tol: Optional[float] = Field(default=None, gt=0)
    cg_tol: Optional[float] = Field(default=None, gt=0)
    max_newton: Optional[int] = Field(default=None, ge=1)
    max_krylov: Optional[int] = Field(default=None, ge=1)
    poisson: Optional[Literal["cg", "factorized"]] = None


class OutputSection(StrictSchema):
    dir: str = "output"
    every_steps: int = Field(default=100, ge=1)
    formats: List[OutputFormat] = Field(default_factory=lambda: ["csv", "pgm"])

    @field_validator("formats", mode="before")
    @classmethod
    def _split_formats(cls, v):
        return _split_list(v)


class RunConfig(StrictSchema):
    """A single simulation run."""

    mesh: MeshSection
    time: TimeSection
    params: ParamsSection
    potential: PotentialSection = Field(default_factory=PotentialSection)
    init: InitSection
    solver: SolverSection = Field(default_factory=SolverSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def model_params(self) -> ModelParams:
        G, L = self.params.matrices()
        return ModelParams(
            eps=self.params.eps,
            kappa=self.params.kappa,
            tau=self.time.tau,
            G=G,
            L=L,
        )

    @property
    def step_count(self) -> int:
        # ceil with a guard against t_end/tau landing a hair above an integer
        ratio = self.time.t_end / self.time.tau
        return max(1, int(np.ceil(ratio - 1e-9)))


class SweepAxis(StrictSchema):
    path: str
    values: List[float]

    @field_validator("values", mode="before")
    @classmethod
    def _split_values(cls, v):
        return _split_list(v)

    @field_validator("values")
    @classmethod
    def _not_empty(cls, v):
        if not v:
            raise ValueError("sweep axis needs at least one value")
        return v


class SweepConfig(StrictSchema):
    """Cartesian parameter grid over a base run."""

    base: RunConfig
    axes: List[SweepAxis] = Field(min_length=1, max_length=2)
    workers: int = Field(default=1, ge=1)
    max_cells: int = Field(default=64, ge=1)

    @model_validator(mode="after")
    def _grid_within_cap(self):
        size = 1
        for axis in self.axes:
            size *= len(axis.values)
        if size > self.max_cells:
            raise ValueError(f"sweep grid has {size} cells, cap is {self.max_cells}")
        return self

    @property
    def cell_count(self) -> int:
        size = 1
        for axis in self.axes:
            size *= len(axis.values)
        return size


class OracleConfig(StrictSchema):
    n: int = Field(ge=4, le=16)
    tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=200000, ge=1)
