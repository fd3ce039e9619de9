"""
Report schemas - payloads written by the CLI as JSON/CSV.
"""

from typing import Any, Literal

from pydantic import BaseModel, Field

CertificateKind = Literal["thm12", "thm13", "thm14", "ode-family"]
Verdict = Literal["certified", "inconclusive"]


class Certificate(BaseModel):
    """
    Outcome of a trial-function argument.

    "certified" requires value < -10 x error_estimate (ode-family: residual
    within tolerance).
    """

    kind: CertificateKind
    parameters: dict[str, Any] = Field(default_factory=dict)
    value: float | None = None
    error_estimate: float = 0.0
    verdict: Verdict = "inconclusive"
    details: dict[str, Any] = Field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"


class ThresholdResponse(BaseModel):
    """Threshold E1(0) and section constants."""

    E1: float
    E2: float
    gap: float
    degenerate: bool
    residual: float
    beta1: float
    beta2: float
    A: float
    B: float
    C: float
    A_tilde: float
    C_tilde: float
    v1_min: float
    v1_positive: bool


class TubeResponse(BaseModel):
    """Tube spectrum for one (eps, L)."""

    eps: float
    L: float
    nx: int
    threshold: float
    eigenvalues: list[float]
    residuals: list[float]
    classifications: list[str] = Field(default_factory=list)
    metadata: dict[str, Any] = Field(default_factory=dict)


class ScenarioResult(BaseModel):
    """One acceptance scenario of verify-all."""

    name: str
    passed: bool
    criteria: dict[str, bool] = Field(default_factory=dict)
    values: dict[str, Any] = Field(default_factory=dict)
    error: str | None = None


class ReportEnvelope(BaseModel):
    """Common JSON envelope of every report."""

    kind: str
    config: dict[str, Any]
    profile_hash: str | None = None
    mesh: dict[str, Any] | None = None
    payload: dict[str, Any]
