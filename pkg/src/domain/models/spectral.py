"""
Results of fiber, effective-1D and tube computations.

Plain frozen containers; the services own the numerics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from src.domain.models.mesh import FemMatrices, Mesh
from src.domain.models.profile import ProfileSpec

Classification = Literal["candidate", "inconclusive", "above_threshold"]


@dataclass(frozen=True, eq=False)
class FiberProblem:
    """Fiber operator H(p) discretised as K(p) x = E M x."""

    p: float
    beta1: float
    beta2: float
    fem: FemMatrices
    K: sp.csr_matrix
    M: sp.csr_matrix

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.K.data)


@dataclass(frozen=True, eq=False)
class GroundData:
    """Threshold E1(0), ground mode v1 and the section constants."""

    E1: float
    E2: float
    v1: NDArray[np.float64]
    beta1: float
    beta2: float
    A: float
    B: float
    C: float
    A_tilde: float
    C_tilde: float
    residual: float
    degenerate: bool = False
    v1_positive: bool = True

    @property
    def gap(self) -> float:
        return self.E2 - self.E1

    def coefficients(self) -> dict[str, float]:
        return {
            "A": self.A,
            "B": self.B,
            "C": self.C,
            "A_tilde": self.A_tilde,
            "C_tilde": self.C_tilde,
        }


@dataclass(frozen=True, eq=False)
class BandTable:
    """Band functions E_n(p_k) over a momentum grid; invalid rows hold NaN."""

    p_grid: NDArray[np.float64]
    energies: NDArray[np.float64]
    residuals: NDArray[np.float64]
    valid: NDArray[np.bool_]
    ground_vectors: tuple[NDArray | None, ...] = field(repr=False, default=())
    diagnostics: dict = field(default_factory=dict)

    @property
    def nbands(self) -> int:
        return int(self.energies.shape[1])


@dataclass(frozen=True, eq=False)
class EffectiveModel:
    """Sampled effective potential V on [-X, X]."""

    profile: ProfileSpec
    A: float
    B: float
    C: float
    x: NDArray[np.float64]
    V: NDArray[np.float64]
    integral: float
    eps: float = 1.0

    @property
    def X(self) -> float:
        return float(self.x[-1])

    @property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def v_min(self) -> float:
        return float(self.V.min())

    @property
    def argmin(self) -> float:
        return float(self.x[int(np.argmin(self.V))])

    def potential(self, x) -> NDArray[np.float64]:
        """V evaluated from the expressions at arbitrary points."""
        p = self.profile
        fp = p.fp(x)
        gp = p.gp(x)
        return (
            self.A * (fp**2 - p.beta1**2)
            + 2.0 * self.B * (fp * gp - p.beta1 * p.beta2)
            + self.C * (gp**2 - p.beta2**2)
        )


@dataclass(frozen=True, eq=False)
class Schrodinger1D:
    """Negative spectrum of -d^2/dx^2 + V/eps^2 with Dirichlet ends at +-X."""

    X: float
    hx: float
    eps: float
    x: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]
    tol_edge: float
    marginal: tuple[float, ...] = ()

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def count_interval(self) -> tuple[int, int]:
        """Certain count and count including marginal eigenvalues."""
        return self.count, self.count + len(self.marginal)


@dataclass(frozen=True, eq=False)
class TubeDiscretization:
    """Tensor P1(x) x P1(S) discretisation of the truncated tube (-L, L) x S."""

    profile: ProfileSpec
    mesh: Mesh
    fem: FemMatrices
    L: float
    nx: int
    eps: float
    K: sp.csr_matrix
    M: sp.csr_matrix
    x_nodes: NDArray[np.float64]

    @property
    def hx(self) -> float:
        return 2.0 * self.L / self.nx

    @property
    def n_section(self) -> int:
        return self.fem.n

    @property
    def n_dofs(self) -> int:
        return (self.nx - 1) * self.fem.n

    def dof(self, x_index: int, section_index: int) -> int:
        """Global index of (interior x-node, interior section DOF)."""
        return x_index * self.fem.n + section_index


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Lowest tube eigenvalues with the essential threshold attached."""

    L: float
    nx: int
    eps: float
    eigenvalues: NDArray[np.float64]
    residuals: NDArray[np.float64]
    threshold: float
    classifications: tuple[Classification, ...] = ()
    metadata: dict = field(default_factory=dict)

    @property
    def below_threshold(self) -> NDArray[np.float64]:
        return self.eigenvalues[self.eigenvalues < self.threshold]

    @property
    def n_candidates(self) -> int:
        return sum(1 for c in self.classifications if c == "candidate")


@dataclass(frozen=True, eq=False)
class DetectionReport:
    """detect_discrete outcome: per-L reports plus the classification of the last L."""

    eps: float
    L_list: tuple[float, ...]
    reports: tuple[SpectralReport, ...]
    threshold: float
    classified: SpectralReport
    lambda1_by_L: tuple[float, ...]

    @property
    def n_candidates(self) -> int:
        return self.classified.n_candidates
