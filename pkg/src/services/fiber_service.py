"""
Fiber service - cross-section operators H(p), band functions, threshold E1(0)
and the section constants A, B, C, A~ (and C~ for the mirrored axis).
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from src.core.concurrency import map_ordered
from src.core.exceptions import ConfigError, ConsistencyError, SolverError
from src.core.logging import get_logger
from src.domain.models import BandTable, FemMatrices, FiberProblem, GroundData, Mesh
from src.domain.schemas.config import SolverConfig
from src.infra.linalg import EigResult, solve_gevp_smallest
from src.services.mesh_service import MeshService

logger = get_logger(__name__)

DEGENERACY_GAP = 1e-8


def rectangle_threshold(a: float, b: float, beta1: float = 0.0) -> float:
    """E1(0) of the rectangle (0,a)x(0,b) for beta2 = 0: separable oracle."""
    return (1.0 + beta1**2) * math.pi**2 / a**2 + math.pi**2 / b**2


@dataclass(frozen=True)
class GaugeCheck:
    """Deviation of E1(p) - E1(0) from p^2/(1+beta1^2) over a momentum grid."""

    beta1: float
    p_grid: tuple[float, ...]
    deviations: tuple[float, ...]

    @property
    def max_deviation(self) -> float:
        return max(self.deviations) if self.deviations else 0.0

    @property
    def max_relative(self) -> float:
        """max |dev| / (1 + p^2)."""
        return max(
            (d / (1.0 + p * p) for p, d in zip(self.p_grid, self.deviations, strict=True)),
            default=0.0,
        )


@dataclass(frozen=True)
class ConvergenceStudy:
    """E1(0) on nested refinements against an oracle value."""

    h: tuple[float, ...]
    values: tuple[float, ...]
    oracle: float
    errors: tuple[float, ...]
    orders: tuple[float, ...]
    fitted_order: float
    monotone: bool


class FiberService:
    """
    Fiber operators on one cross-section mesh.

    The P1 matrices are assembled once per service instance and shared by
    every fiber solve.
    """

    def __init__(
        self,
        mesh: Mesh,
        solver: SolverConfig | None = None,
        fem: FemMatrices | None = None,
        mesh_service: MeshService | None = None,
    ):
        self.mesh = mesh
        self.solver = solver or SolverConfig()
        self.mesh_service = mesh_service or MeshService()
        self.fem = fem if fem is not None else self.mesh_service.assemble_p1(mesh)

    def assemble(self, p: float, beta1: float, beta2: float) -> FiberProblem:
        """
        K(p) = p^2 M + (1+b1^2) D11 + (1+b2^2) D22 + b1 b2 (D12 + D12^T)
               + i p (b1 (C1 - C1^T) + b2 (C2 - C2^T)).

        The quadratic form x^H K(p) x reproduces the fiber form on P1
        functions. K(0) and every K with beta = 0 stay real.
        """
        f = self.fem
        K = (
            (1.0 + beta1**2) * f.D11
            + (1.0 + beta2**2) * f.D22
            + (beta1 * beta2) * (f.D12 + f.D12.T)
        )
        if p != 0.0:
            K = K + (p * p) * f.M
            if beta1 != 0.0 or beta2 != 0.0:
                advection = beta1 * (f.C1 - f.C1.T) + beta2 * (f.C2 - f.C2.T)
                K = K + (1j * p) * advection
        K = sp.csr_matrix(K)
        K.sort_indices()
        return FiberProblem(p=float(p), beta1=beta1, beta2=beta2, fem=f, K=K, M=f.M)

    def solve(self, fp: FiberProblem, nbands: int) -> EigResult:
        """nbands smallest eigenpairs; K(p) is positive definite so shift 0 is safe."""
        return solve_gevp_smallest(
            fp.K,
            fp.M,
            k=nbands,
            tol=self.solver.tol,
            shift=0.0,
            method=self.solver.method,
            max_iter=self.solver.max_iter,
            kind="fiber",
        )

    def threshold(self, beta1: float = 0.0, beta2: float = 0.0) -> GroundData:
        """E1(0) with a sign-fixed ground mode v1 and the section constants."""
        res = self.solve(self.assemble(0.0, beta1, beta2), nbands=min(2, self.fem.n))
        E1 = float(res.eigenvalues[0])
        E2 = float(res.eigenvalues[1]) if res.k > 1 else math.inf

        v1 = np.real(res.eigenvectors[:, 0]).astype(np.float64)
        v1 = v1 * np.sign(v1[np.argmax(np.abs(v1))])
        v1 = v1 / math.sqrt(float(v1 @ (self.fem.M @ v1)))

        degenerate = (E2 - E1) < DEGENERACY_GAP * E1
        if degenerate:
            logger.warning("degenerate_ground_state", E1=E1, E2=E2, gap=E2 - E1)
        v1_positive = bool(np.all(v1 > 0.0))
        if not v1_positive:
            logger.warning(
                "ground_state_not_positive",
                n_nonpositive=int(np.sum(v1 <= 0.0)),
                min_entry=float(v1.min()),
            )

        coeffs = self.coefficients(v1)
        logger.info(
            "threshold_computed",
            E1=E1,
            E2=E2,
            beta1=beta1,
            beta2=beta2,
            n_dofs=self.fem.n,
            **coeffs,
        )
        return GroundData(
            E1=E1,
            E2=E2,
            v1=v1,
            beta1=float(beta1),
            beta2=float(beta2),
            residual=float(res.residuals[0]),
            degenerate=bool(degenerate),
            v1_positive=v1_positive,
            **coeffs,
        )

    def coefficients(self, v1: np.ndarray | GroundData) -> dict[str, float]:
        """A, B, C, A~, C~ as quadratic forms of v1."""
        if isinstance(v1, GroundData):
            v1 = v1.v1
        f = self.fem
        return {
            "A": float(v1 @ (f.D11 @ v1)),
            "B": float(v1 @ (f.D12 @ v1)),
            "C": float(v1 @ (f.D22 @ v1)),
            "A_tilde": float(v1 @ (f.Y1D11 @ v1)),
            "C_tilde": float(v1 @ (f.Y2D22 @ v1)),
        }

    def band_structure(
        self,
        beta1: float,
        beta2: float,
        p_grid: list[float],
        nbands: int,
    ) -> BandTable:
        """
        Band functions over p_grid, solved concurrently and gathered in grid order.

        A failed point marks its row invalid (NaN) instead of aborting the table.
        """
        if nbands < 1 or nbands > self.fem.n:
            raise ConfigError(f"nbands={nbands} outside 1..{self.fem.n}")
        grid = np.asarray(sorted(float(p) for p in p_grid), dtype=np.float64)

        def solve_point(p: float) -> EigResult | None:
            try:
                return self.solve(self.assemble(p, beta1, beta2), nbands)
            except SolverError as e:
                logger.warning("band_point_failed", p=p, error=e.error_code, message=e.message)
                return None

        results = map_ordered(solve_point, list(grid))
        energies = np.full((grid.size, nbands), np.nan)
        residuals = np.full((grid.size, nbands), np.nan)
        vectors: list[np.ndarray | None] = []
        for row, res in enumerate(results):
            if res is None:
                vectors.append(None)
                continue
            energies[row] = res.eigenvalues
            residuals[row] = res.residuals
            vectors.append(res.eigenvectors[:, 0])
        valid = ~np.isnan(energies[:, 0])

        E10 = self.threshold(beta1, beta2).E1
        diagnostics = self._band_diagnostics(grid, energies, valid, E10, beta1, beta2)
        logger.info("band_structure_computed", points=int(grid.size), **diagnostics)
        return BandTable(
            p_grid=grid,
            energies=energies,
            residuals=residuals,
            valid=valid,
            ground_vectors=tuple(vectors),
            diagnostics=diagnostics,
        )

    @staticmethod
    def _band_diagnostics(grid, energies, valid, E10, beta1, beta2) -> dict:
        symmetry = 0.0
        for i, p in enumerate(grid):
            j = np.flatnonzero(np.isclose(grid, -p, atol=1e-12))
            if j.size and valid[i] and valid[j[0]]:
                dev = np.abs(energies[i] - energies[j[0]]) / (1.0 + np.abs(energies[i]))
                symmetry = max(symmetry, float(dev.max()))

        lower_bound_gap = float(np.min(energies[valid, 0] - E10)) if valid.any() else math.nan

        growth_ok = None
        if valid.any():
            k = int(np.argmax(np.where(valid, np.abs(grid), -1.0)))
            p_max = abs(float(grid[k]))
            if p_max > 0:
                growth_ok = bool(
                    energies[k, 0] > E10 + 0.5 * p_max**2 / (1.0 + beta1**2 + beta2**2)
                )
        return {
            "E1_at_zero": E10,
            "symmetry_max_relative": symmetry,
            "lower_bound_gap": lower_bound_gap,
            "growth_ok": growth_ok,
            "invalid_points": int((~valid).sum()),
        }

    def gauge_check(self, beta1: float, p_grid: list[float]) -> GaugeCheck:
        """Compare E1(p) - E1(0) with p^2/(1+beta1^2) for beta2 = 0."""
        E10 = self.threshold(beta1, 0.0).E1
        grid = [float(p) for p in p_grid]

        def deviation(p: float) -> float:
            E1p = float(self.solve(self.assemble(p, beta1, 0.0), 1).eigenvalues[0])
            return abs(E1p - E10 - p * p / (1.0 + beta1**2))

        deviations = map_ordered(deviation, grid)
        check = GaugeCheck(beta1=float(beta1), p_grid=tuple(grid), deviations=tuple(deviations))
        logger.info(
            "gauge_checked",
            beta1=beta1,
            max_deviation=check.max_deviation,
            max_relative=check.max_relative,
        )
        return check

    def threshold_convergence(
        self,
        levels: int,
        oracle: float,
        beta1: float = 0.0,
        beta2: float = 0.0,
    ) -> ConvergenceStudy:
        """
        E1(0) on this mesh and `levels` nested uniform refinements.

        Orders are log2 of successive error ratios; fitted_order is the slope
        of log(error) against log(h).
        """
        if levels < 1:
            raise ConfigError("threshold_convergence needs at least one refinement")
        meshes = [self.mesh]
        for _ in range(levels):
            meshes.append(self.mesh_service.refine_uniform(meshes[-1]))

        values = []
        for m in meshes:
            service = self if m is self.mesh else FiberService(m, self.solver, mesh_service=self.mesh_service)
            values.append(service.threshold(beta1, beta2).E1)

        h = [m.h for m in meshes]
        errors = [abs(v - oracle) for v in values]
        orders = [
            math.log2(e0 / e1) if e0 > 0 and e1 > 0 else math.nan
            for e0, e1 in zip(errors, errors[1:], strict=False)
        ]
        fitted = float(np.polyfit(np.log(h), np.log(np.maximum(errors, 1e-300)), 1)[0])
        monotone = all(b <= a + 1e-10 * abs(a) for a, b in zip(values, values[1:], strict=False))
        if not monotone:
            raise ConsistencyError("E1(0) increased under nested refinement")

        return ConvergenceStudy(
            h=tuple(h),
            values=tuple(values),
            oracle=float(oracle),
            errors=tuple(errors),
            orders=tuple(orders),
            fitted_order=fitted,
            monotone=monotone,
        )
