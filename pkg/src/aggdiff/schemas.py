"""Config and payload schemas shared by the CLI runner and the HTTP service.

One JSON document describes a run: sections grid, kernel, entropy plus the
optional flow, probe, sweep, classify, profile sections and scalar mass and
seed.  Unknown keys are rejected everywhere so experiment-file typos fail
loudly instead of silently running defaults.
"""

from __future__ import annotations

import hashlib
import json
import math

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .flow import FlowConfig
from .grids import RadialGrid
from .models import EntropyLaw, Kernel


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSpec(_Strict):
    d: int = Field(ge=2, le=3)
    R: float = Field(gt=0)
    N: int = Field(ge=8)

    def to_grid(self) -> RadialGrid:
        return RadialGrid(self.d, self.R, self.N)


class KernelSpec(_Strict):
    shape: str
    d: int = Field(ge=2, le=3)
    c: float = Field(ge=0)
    a: float = Field(default=1.0, gt=0)
    rho0: float = Field(default=1.0, gt=0)
    beta: float = Field(default=0.0, ge=0)
    cutoff: float = Field(default=1.0, gt=0)
    trunc: float | None = Field(default=None, gt=0)

    def to_kernel(self) -> Kernel:
        return Kernel(
            shape=self.shape,
            d=self.d,
            c=self.c,
            a=self.a,
            rho0=self.rho0,
            beta=self.beta,
            cutoff=self.cutoff,
            trunc=math.inf if self.trunc is None else self.trunc,
        )


class EntropySpec(_Strict):
    form: str
    m: float | None = Field(default=None, gt=1)
    coeff: float = Field(default=1.0, gt=0)
    chi0: float | None = Field(default=None, gt=0)
    terms: list[tuple[float, float]] | None = None

    @model_validator(mode="after")
    def _check_form(self):
        if self.form == "power":
            if self.m is None:
                raise ValueError("power entropy needs m")
        elif self.form == "quadratic":
            if self.chi0 is None:
                raise ValueError("quadratic entropy needs chi0")
        elif self.form == "power_sum":
            if not self.terms:
                raise ValueError("power_sum entropy needs terms")
        else:
            raise ValueError(f"unknown entropy form {self.form!r}")
        return self

    def to_entropy(self) -> EntropyLaw:
        if self.form == "power":
            return EntropyLaw.power(self.m, self.coeff)
        if self.form == "quadratic":
            return EntropyLaw.quadratic(self.chi0)
        return EntropyLaw(form="power_sum", terms=tuple((c, e) for c, e in self.terms))


class FlowSpec(_Strict):
    scheme: str = "projected_descent"
    tau: float | None = Field(default=None, gt=0)
    cfl: float = Field(default=0.4, gt=0)
    max_steps: int = Field(default=60000, ge=1)
    tol_stat: float = Field(default=1e-5, gt=0)
    tol_sup: float = Field(default=0.02, gt=0)
    tol_F: float = Field(default=1e-6, gt=0)
    theta_b: float = Field(default=0.3, gt=0, lt=1)
    resymmetrize_every: int = Field(default=0, ge=0)
    widths: list[float] = Field(default=[0.5, 1.0, 2.0], min_length=1)
    log_every: int = Field(default=1, ge=1)

    @field_validator("widths")
    @classmethod
    def _positive_widths(cls, v):
        if any(w <= 0 for w in v):
            raise ValueError("widths must be positive")
        return v

    def to_config(self) -> FlowConfig:
        return FlowConfig(
            scheme=self.scheme,
            tau=self.tau,
            cfl=self.cfl,
            max_steps=self.max_steps,
            tol_stat=self.tol_stat,
            tol_sup=self.tol_sup,
            tol_F=self.tol_F,
            theta_b=self.theta_b,
            resymmetrize_every=self.resymmetrize_every,
            widths=tuple(self.widths),
            log_every=self.log_every,
        )


class ProbeSpec(_Strict):
    width: float = Field(default=1.0, gt=0)
    lambdas: list[float] = Field(default=[2.0**-k for k in range(7)], min_length=1)

    @field_validator("lambdas")
    @classmethod
    def _valid_lambdas(cls, v):
        if any(not 0 < l <= 1 for l in v):
            raise ValueError("lambdas must lie in (0, 1]")
        return v


class SweepSpec(_Strict):
    parameter: str
    values: list[float] = Field(min_length=1)

    @field_validator("parameter")
    @classmethod
    def _known_parameter(cls, v):
        if v not in ("kernel_c", "mass", "entropy_m"):
            raise ValueError("parameter must be kernel_c, mass, or entropy_m")
        return v


class ClassifySpec(_Strict):
    delta: float = Field(default=1.0, gt=0)
    c0: float | None = Field(default=None, ge=0)
    nu: float | None = Field(default=None, gt=1, lt=2)
    alpha: float | None = Field(default=None, gt=0)
    ensemble: int = Field(default=64, ge=1)


class ProfileSpec(_Strict):
    path: str | None = None  # CSV on disk wins over the synthetic width
    width: float = Field(default=1.0, gt=0)


class RunConfig(_Strict):
    grid: GridSpec
    kernel: KernelSpec
    entropy: EntropySpec
    mass: float = Field(default=1.0, gt=0)
    seed: int = 0
    flow: FlowSpec = FlowSpec()
    probe: ProbeSpec | None = None
    sweep: SweepSpec | None = None
    classify: ClassifySpec | None = None
    profile: ProfileSpec | None = None

    @model_validator(mode="after")
    def _dimensions_agree(self):
        if self.grid.d != self.kernel.d:
            raise ValueError("grid and kernel dimension disagree")
        return self

    def config_hash(self) -> str:
        blob = json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
