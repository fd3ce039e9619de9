"""
Scenario configuration schema.

One JSON file describes a scenario; every field has a default and unknown
keys are rejected. The resolved model (defaults included) is embedded in
every report.
"""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ShiftPolicy = Literal["safe", "threshold", "zero"]
SolverMethod = Literal["auto", "sparse", "dense"]
OutputFormat = Literal["json", "csv"]


class StrictModel(BaseModel):
    """Base for config sections: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid")


class CrossSectionConfig(StrictModel):
    """Cross-section geometry and mesh resolution."""

    kind: Literal["rectangle", "disk", "polygon"] = "rectangle"
    a: float = Field(default=1.0, gt=0)
    b: float = Field(default=1.0, gt=0)
    r: float = Field(default=1.0, gt=0)
    points: list[tuple[float, float]] | None = None
    origin: tuple[float, float] = (0.0, 0.0)
    h: float = Field(default=1.0 / 32.0, gt=0)
    refinements: int = Field(default=0, ge=0, le=6)

    @model_validator(mode="after")
    def check_polygon(self):
        if self.kind == "polygon" and (self.points is None or len(self.points) < 3):
            raise ValueError("polygon cross-section needs at least 3 points")
        return self


class ProfileConfig(StrictModel):
    """f', g' as expression text with their declared limits."""

    fprime: str = "0"
    gprime: str = "0"
    beta1: float = 0.0
    beta2: float = 0.0
    tail_X: float = Field(default=10.0, gt=0)
    tail_tol: float = Field(default=1e-6, gt=0)


class TubeConfig(StrictModel):
    """
    Truncation lengths and longitudinal resolution.

    hx fixes the spacing over the whole L_list (nested grids); nx applies to
    a single L. With neither, the spacing equals the section mesh size.
    """

    L_list: list[float] = Field(default_factory=lambda: [10.0, 15.0, 20.0])
    nx: int | None = Field(default=None, ge=2)
    hx: float | None = Field(default=None, gt=0)

    @field_validator("L_list")
    @classmethod
    def check_ascending(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("L_list must not be empty")
        if any(L <= 0 for L in v):
            raise ValueError("L values must be positive")
        if any(b <= a for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("L_list must be strictly ascending")
        return v


class SolverConfig(StrictModel):
    k: int = Field(default=4, ge=1)
    tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=5000, ge=1)
    shift_policy: ShiftPolicy = "safe"
    method: SolverMethod = "auto"


class BandsConfig(StrictModel):
    """Momentum grid: p_min..p_max with step p_step, or explicit p_values."""

    p_min: float = -3.0
    p_max: float = 3.0
    p_step: float = Field(default=0.2, gt=0)
    p_values: list[float] | None = None
    nbands: int = Field(default=3, ge=1)

    @model_validator(mode="after")
    def check_range(self):
        if self.p_values is None and self.p_max < self.p_min:
            raise ValueError("p_max must be >= p_min")
        return self

    def grid(self) -> list[float]:
        if self.p_values is not None:
            return sorted(float(p) for p in self.p_values)
        n = int(round((self.p_max - self.p_min) / self.p_step))
        return [round(self.p_min + i * self.p_step, 12) for i in range(n + 1)]


class EffectiveConfig(StrictModel):
    """Grid for V and the 1D problems, and the thin-limit epsilon list."""

    X: float = Field(default=20.0, gt=0)
    hx: float = Field(default=0.01, gt=0)
    eps_list: list[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])

    @field_validator("eps_list")
    @classmethod
    def check_descending(cls, v: list[float]) -> list[float]:
        if any(e <= 0 for e in v):
            raise ValueError("eps values must be positive")
        if any(b >= a for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("eps_list must be strictly descending")
        return v


class AsymptoticsConfig(StrictModel):
    """Large-coupling sweep of -d^2/dx^2 + mu W."""

    W: str = "-exp(-x^2)"
    mu_list: list[float] = Field(default_factory=lambda: [1e2, 1e3, 1e4])
    j: int = Field(default=1, ge=1)
    X: float = Field(default=10.0, gt=0)

    @field_validator("mu_list")
    @classmethod
    def check_ascending(cls, v: list[float]) -> list[float]:
        if not v or any(m <= 0 for m in v):
            raise ValueError("mu values must be positive")
        if any(b <= a for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("mu_list must be strictly ascending")
        return v


class CertifyConfig(StrictModel):
    """Parameters of the trial-function certificates."""

    n_max: int = Field(default=64, ge=1)
    thm14_n: int = Field(default=4, ge=1)
    axis: Literal[1, 2] = 1
    xi_shifts: list[float] = Field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0])
    xi_widths: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    ode_c: float = -1.0
    ode_beta1: float = 1.0
    ode_A_tilde: float | None = None
    ode_x_min: float = -2.0
    ode_x_max: float = 2.0
    ode_points: int = Field(default=401, ge=2)

    @field_validator("xi_widths")
    @classmethod
    def check_widths(cls, v: list[float]) -> list[float]:
        if not v or any(w <= 0 for w in v):
            raise ValueError("xi widths must be positive")
        return v

    def ode_grid(self) -> np.ndarray:
        return np.linspace(self.ode_x_min, self.ode_x_max, self.ode_points)


class OutputConfig(StrictModel):
    directory: str | None = None
    formats: list[OutputFormat] = Field(default_factory=lambda: ["json", "csv"])


class ScenarioConfig(StrictModel):
    """Root of a scenario file."""

    name: str = "scenario"
    cross_section: CrossSectionConfig = Field(default_factory=CrossSectionConfig)
    profile: ProfileConfig = Field(default_factory=ProfileConfig)
    epsilon: float = Field(default=1.0, gt=0)
    tube: TubeConfig = Field(default_factory=TubeConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    bands: BandsConfig = Field(default_factory=BandsConfig)
    effective: EffectiveConfig = Field(default_factory=EffectiveConfig)
    asymptotics: AsymptoticsConfig = Field(default_factory=AsymptoticsConfig)
    certify: CertifyConfig = Field(default_factory=CertifyConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
