from pydantic import BaseModel, Field


class Provenance(BaseModel):
    seed: int | None = None
    grid: dict[str, float]
    version: str


class Summary(BaseModel):
    """Contents of summary.json: every scalar keyed by its usual symbol."""

    scenario: str
    target: str
    symbols: dict[str, float | None]
    provenance: Provenance
    warnings: list[str] = Field(default_factory=list)


class SimulationResult(BaseModel):
    n: int
    seed: int
    mean: float
    variance: float
    std_err_mean: float
    std_err_variance: float
    extra_scalars: dict[str, float] = Field(default_factory=dict)


class ComparisonResult(BaseModel):
    verdict: str
    z_scores: dict[str, float]
    ks_statistic: float | None = None
    ks_critical: float | None = None
    ks_pvalue: float | None = None
    failures: list[str] = Field(default_factory=list)


class CheckResult(BaseModel):
    check: str
    formula: str = ""
    passed: bool
    detail: str


class SelftestReport(BaseModel):
    seed: int
    n: int
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)
