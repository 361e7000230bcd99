"""Scenario file schema.

A scenario names a target (a generic random sum or one of the three systems),
its parameters, the survival grid, the simulation size and the outputs to
produce. Distributions and step laws are tagged unions keyed by ``kind`` and
``coupling``.
"""

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

Positive = Annotated[float, Field(gt=0)]


class ExponentialSpec(BaseModel):
    kind: Literal["exponential"]
    rate: Positive


class DeterministicSpec(BaseModel):
    kind: Literal["deterministic"]
    value: float = Field(..., ge=0, description="Location of the point mass")


class UniformSpec(BaseModel):
    kind: Literal["uniform"]
    lo: float = Field(..., ge=0)
    hi: float

    @model_validator(mode="after")
    def check_order(self):
        if self.hi <= self.lo:
            raise ValueError("hi must be greater than lo")
        return self


class ErlangSpec(BaseModel):
    kind: Literal["erlang"]
    shape: int = Field(..., ge=1)
    rate: Positive


class TabulatedSpec(BaseModel):
    """Piecewise-linear CDF given inline or as a CSV file with columns t,cdf."""

    kind: Literal["tabulated"]
    grid: list[float] | None = None
    cdf: list[float] | None = None
    path: str | None = Field(None, description="CSV path, relative to the scenario file")

    @model_validator(mode="after")
    def check_source(self):
        inline = self.grid is not None or self.cdf is not None
        if inline == (self.path is not None):
            raise ValueError("give either grid and cdf, or path")
        if inline and (self.grid is None or self.cdf is None):
            raise ValueError("grid and cdf must be given together")
        return self


DistributionSpec = Annotated[
    ExponentialSpec | DeterministicSpec | UniformSpec | ErlangSpec | TabulatedSpec,
    Field(discriminator="kind"),
]


class IndependentSpec(BaseModel):
    coupling: Literal["independent"]
    zeta: DistributionSpec
    q: float = Field(..., ge=0, le=1)


class MinThresholdSpec(BaseModel):
    coupling: Literal["min_threshold"]
    tau: DistributionSpec
    eta: DistributionSpec


class RaceStepSpec(BaseModel):
    coupling: Literal["race_step"]
    tau: DistributionSpec
    eta: DistributionSpec


class ShiftedMinSpec(BaseModel):
    coupling: Literal["shifted_min"]
    tau: DistributionSpec
    eta: DistributionSpec
    shift: DistributionSpec


LawSpec = Annotated[
    IndependentSpec | MinThresholdSpec | RaceStepSpec | ShiftedMinSpec,
    Field(discriminator="coupling"),
]


class GeigerSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    model: Literal["geiger"]
    lam: Positive | None = Field(None, alias="lambda", description="Arrival rate of particles")
    lock: DistributionSpec
    arrivals: DistributionSpec | None = Field(
        None, description="Renewal inter-arrival law replacing the Poisson flow"
    )

    @model_validator(mode="after")
    def check_flow(self):
        if self.lam is None and self.arrivals is None:
            raise ValueError("geiger model needs lambda or an arrivals law")
        return self


class RedundantSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    model: Literal["redundant"]
    lam: Positive = Field(..., alias="lambda", description="Failure rate of the operating unit")
    lam_prime: float = Field(0.0, ge=0, alias="lambda_prime", description="Standby failure rate")
    repair: DistributionSpec


class SsqsSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    model: Literal["ssqs"]
    lam: Positive = Field(..., alias="lambda", description="Poisson arrival rate")
    service: DistributionSpec


ModelSpec = Annotated[GeigerSpec | RedundantSpec | SsqsSpec, Field(discriminator="model")]


class GridSpec(BaseModel):
    t_max: Positive
    h: Positive

    @model_validator(mode="after")
    def check_span(self):
        if self.t_max < 10 * self.h * (1 - 1e-12):
            raise ValueError("t_max must be at least 10 h")
        return self


class SimSpec(BaseModel):
    n: int = Field(..., ge=1)
    seed: int = Field(..., ge=0)


Output = Literal["moments", "survival", "laplace", "limit_check", "simulate", "compare"]


class Scenario(BaseModel):
    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "name": "ssqs_mm1",
                "target": "ssqs",
                "model": {
                    "model": "ssqs",
                    "lambda": 1.0,
                    "service": {"kind": "exponential", "rate": 2.0},
                },
                "sim": {"n": 100000, "seed": 42},
                "outputs": ["moments", "simulate", "compare"],
            }
        },
    )

    name: str | None = None
    target: Literal["random_sum", "geiger", "redundant", "ssqs"]
    law: LawSpec | None = None
    model: ModelSpec | None = None
    grid: GridSpec | None = None
    sim: SimSpec | None = None
    outputs: list[Output] = Field(default_factory=lambda: ["moments", "survival"])
    laplace_z: list[Annotated[float, Field(ge=0)]] = Field(
        default_factory=lambda: [0.1, 1.0, 10.0], description="Points where transforms are reported"
    )
    limit_z: list[Annotated[float, Field(gt=0)]] = Field(
        default_factory=lambda: [0.1 * k for k in range(1, 101)],
        description="Grid of the scaled-limit diagnostic",
    )

    @model_validator(mode="after")
    def check_target(self):
        if self.target == "random_sum":
            if self.law is None:
                raise ValueError("target random_sum needs a law")
        elif self.model is None or self.model.model != self.target:
            raise ValueError(f"target {self.target} needs a model with model={self.target!r}")
        if "compare" in self.outputs and "simulate" not in self.outputs:
            self.outputs.append("simulate")
        return self
