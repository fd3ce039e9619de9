"""
Tube service - the straightened waveguide form on the truncated tube
(-L, L) x S, its lowest eigenvalues and the discrete-spectrum detector.

The quadratic form is

    b_eps(psi) = int |d_x psi - F d_1 psi - G d_2 psi|^2 + |grad_y psi|^2 / eps^2

with F = f'/eps, G = g'/eps, discretised by P1 in x tensor P1 on S.
"""

import math
import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.integrate import quad_vec

from src.core.concurrency import map_ordered
from src.core.exceptions import ConfigError, ConsistencyError
from src.core.logging import get_logger
from src.domain.models import (
    DetectionReport,
    FemMatrices,
    GroundData,
    Mesh,
    ProfileSpec,
    SpectralReport,
    TubeDiscretization,
)
from src.domain.schemas.config import ShiftPolicy, SolverConfig
from src.infra.linalg import dense_gevp, solve_gevp_smallest
from src.services.fiber_service import FiberService

logger = get_logger(__name__)

_GAUSS = np.array([-1.0, 1.0]) / math.sqrt(3.0)
SAFE_SHIFT_FACTOR = 0.99
MARGIN_FACTOR = 10.0
STABILIZATION_TOL = 1e-4
MONOTONE_TOL = 1e-10


@dataclass(frozen=True)
class MetricCheck:
    """G(x) = grad L (grad L)^T at each sample and its determinant."""

    x: NDArray[np.float64]
    G: NDArray[np.float64]
    det: NDArray[np.float64]

    @property
    def max_det_error(self) -> float:
        return float(np.max(np.abs(self.det - 1.0))) if self.det.size else 0.0


@dataclass(frozen=True)
class SeparableTerm:
    """One product a(x) u(y) of a separable trial function."""

    a: Callable[[float], float]
    da: Callable[[float], float]
    u: NDArray[np.float64]


@dataclass(frozen=True)
class FormValue:
    """b_eps and ||.||^2 of a separable trial function, with quadrature errors."""

    form: float
    norm: float
    form_error: float
    norm_error: float

    def shifted(self, level: float) -> float:
        """form - level * norm."""
        return self.form - level * self.norm


def _x_matrices(nodes: NDArray, F: NDArray, G: NDArray):
    """
    1D P1 matrices on `nodes`, restricted to interior nodes.

    F, G hold the coefficients at the two Gauss points of every element
    (shape (nx, 2)). Returns Kx, Mx, Mx(F^2), Mx(G^2), Mx(FG), Gx(F), Gx(G)
    with Gx(c)[a, b] = int c theta_a' theta_b.
    """
    nx = nodes.size - 1
    h = np.diff(nodes)
    # basis values at the Gauss points: theta_left, theta_right
    t = 0.5 * (1.0 + _GAUSS)
    phi = np.stack([1.0 - t, t])  # (2 basis, 2 points)
    w = 0.5 * h[:, None] * np.ones(2)[None, :]  # (nx, 2)
    dphi = np.stack([-1.0 / h, 1.0 / h], axis=1)  # (nx, 2 basis)

    def mass(c: NDArray) -> NDArray:
        return np.einsum("eg,pg,qg->epq", w * c, phi, phi)

    def advection(c: NDArray) -> NDArray:
        return np.einsum("eg,ep,qg->epq", w * c, dphi, phi)

    ones = np.ones_like(F)
    stiff = (1.0 / h)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])[None]
    locals_ = [
        stiff,
        mass(ones),
        mass(F * F),
        mass(G * G),
        mass(F * G),
        advection(F),
        advection(G),
    ]

    e = np.arange(nx)
    conn = np.stack([e, e + 1], axis=1)
    rows = np.repeat(conn, 2, axis=1).ravel()
    cols = np.tile(conn, (1, 2)).ravel()
    interior = np.arange(1, nx)

    out = []
    for loc in locals_:
        mat = sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(nx + 1, nx + 1)).tocsr()
        out.append(mat[interior][:, interior].tocsr())
    return out


class TubeService:
    """
    Tube problems over one cross-section mesh.

    Thresholds E1(0) are computed once per (beta1, beta2) by the fiber
    service on the same mesh.
    """

    def __init__(
        self,
        mesh: Mesh,
        solver: SolverConfig | None = None,
        fiber: FiberService | None = None,
        tail_tol: float = 1e-6,
    ):
        self.mesh = mesh
        self.solver = solver or SolverConfig()
        self.fiber = fiber or FiberService(mesh, self.solver)
        self.fem: FemMatrices = self.fiber.fem
        self.tail_tol = tail_tol
        self._ground: dict[tuple[float, float], GroundData] = {}
        self._section_floor: float | None = None
        self._cache_lock = threading.Lock()

    # ------------------------------------------------------------------
    # Geometry
    # ------------------------------------------------------------------

    @staticmethod
    def metric_check(profile: ProfileSpec, x_samples) -> MetricCheck:
        """
        Metric of the map (x, y) -> (x, f(x) + y1, g(x) + y2).

        Raises ConsistencyError when |det G - 1| exceeds 1e-12 anywhere.
        """
        x = np.atleast_1d(np.asarray(x_samples, dtype=np.float64))
        fp = profile.fp(x)
        gp = profile.gp(x)
        J = np.zeros((x.size, 3, 3))
        J[:, 0, 0] = 1.0
        J[:, 0, 1] = fp
        J[:, 0, 2] = gp
        J[:, 1, 1] = 1.0
        J[:, 2, 2] = 1.0
        G = J @ np.transpose(J, (0, 2, 1))
        det = np.linalg.det(G)
        check = MetricCheck(x=x, G=G, det=det)
        if check.max_det_error > 1e-12:
            raise ConsistencyError(f"det G deviates from 1 by {check.max_det_error:.3e}")
        return check

    # ------------------------------------------------------------------
    # Assembly
    # ------------------------------------------------------------------

    def resolve_nx(self, L: float, nx: int | None = None, hx: float | None = None) -> int:
        """Number of x-intervals on (-L, L): nx, or 2L/hx, or spacing equal to the section h."""
        if nx is not None:
            return int(nx)
        spacing = hx if hx is not None else self.mesh.h
        if spacing <= 0:
            raise ConfigError("longitudinal spacing must be positive")
        return max(2, 2 * int(round(L / spacing)))

    def ground(self, beta1: float, beta2: float) -> GroundData:
        key = (float(beta1), float(beta2))
        with self._cache_lock:
            if key not in self._ground:
                self._ground[key] = self.fiber.threshold(beta1, beta2)
            return self._ground[key]

    def check_truncation(self, profile: ProfileSpec, L: float) -> None:
        ends = np.array([-L, L])
        dev = max(
            float(np.max(np.abs(profile.fp(ends) - profile.beta1))),
            float(np.max(np.abs(profile.gp(ends) - profile.beta2))),
        )
        if dev > self.tail_tol:
            raise ConfigError(
                f"L={L:g} too small: profile deviates by {dev:.3e} from its limits at +-L"
            )

    def assemble_tube(
        self,
        profile: ProfileSpec,
        L: float,
        nx: int | None = None,
        eps: float = 1.0,
        hx: float | None = None,
        check_tails: bool = True,
    ) -> TubeDiscretization:
        """
        Assemble K, M of b_eps on (-L, L) x S with Dirichlet ends and boundary.

        Coefficients f'/eps, g'/eps are sampled at two Gauss points per
        x-element. Global index = x_interior_index * n_section + section_dof.
        """
        if eps <= 0:
            raise ConfigError(f"eps must be positive, got {eps}")
        if L <= 0:
            raise ConfigError(f"L must be positive, got {L}")
        if check_tails:
            self.check_truncation(profile, L)

        n_int = self.resolve_nx(L, nx, hx)
        if n_int < 2:
            raise ConfigError("tube needs at least 2 longitudinal intervals")
        nodes = np.linspace(-L, L, n_int + 1)
        mid = 0.5 * (nodes[:-1] + nodes[1:])
        half = 0.5 * np.diff(nodes)
        xg = mid[:, None] + half[:, None] * _GAUSS[None, :]

        F = profile.fp(xg) / eps
        G = profile.gp(xg) / eps
        Kx, Mx, MF2, MG2, MFG, GF, GG = _x_matrices(nodes, F, G)

        f = self.fem
        adv1 = sp.kron(GF, f.C1)
        adv2 = sp.kron(GG, f.C2)
        K = (
            sp.kron(Kx, f.M)
            - (adv1 + adv1.T)
            - (adv2 + adv2.T)
            + sp.kron(MF2, f.D11)
            + sp.kron(MG2, f.D22)
            + sp.kron(MFG, f.D12 + f.D12.T)
            + sp.kron(Mx, f.S) / eps**2
        ).tocsr()
        M = sp.kron(Mx, f.M).tocsr()
        K.sort_indices()
        M.sort_indices()

        td = TubeDiscretization(
            profile=profile,
            mesh=self.mesh,
            fem=f,
            L=float(L),
            nx=n_int,
            eps=float(eps),
            K=K,
            M=M,
            x_nodes=nodes,
        )
        logger.debug("tube_assembled", L=L, nx=n_int, eps=eps, n_dofs=td.n_dofs, nnz=int(K.nnz))
        return td

    def section_stiffness_floor(self) -> float:
        """lambda_1(S, M) on the section: lower bound of b_eps * eps^2 / ||.||^2."""
        with self._cache_lock:
            if self._section_floor is None:
                res = solve_gevp_smallest(
                    self.fem.S, self.fem.M, k=1, tol=self.solver.tol, method=self.solver.method,
                    kind="section",
                )
                self._section_floor = float(res.eigenvalues[0])
            return self._section_floor

    def shift_for(self, profile: ProfileSpec, eps: float, policy: ShiftPolicy | None = None) -> float:
        policy = policy or self.solver.shift_policy
        match policy:
            case "safe":
                return SAFE_SHIFT_FACTOR * self.section_stiffness_floor() / eps**2
            case "threshold":
                return SAFE_SHIFT_FACTOR * self.ground(profile.beta1, profile.beta2).E1 / eps**2
            case _:
                return 0.0

    # ------------------------------------------------------------------
    # Spectra
    # ------------------------------------------------------------------

    def lowest_modes(
        self,
        td: TubeDiscretization,
        k: int | None = None,
        shift_policy: ShiftPolicy | None = None,
    ) -> SpectralReport:
        """k smallest tube eigenvalues with the threshold E1(0)/eps^2 attached."""
        k = k or self.solver.k
        k = min(k, td.n_dofs)
        threshold = self.ground(td.profile.beta1, td.profile.beta2).E1 / td.eps**2
        shift = self.shift_for(td.profile, td.eps, shift_policy)
        res = solve_gevp_smallest(
            td.K,
            td.M,
            k=k,
            tol=self.solver.tol,
            shift=shift,
            method=self.solver.method,
            max_iter=self.solver.max_iter,
            kind="tube",
        )
        report = SpectralReport(
            L=td.L,
            nx=td.nx,
            eps=td.eps,
            eigenvalues=res.eigenvalues,
            residuals=res.residuals,
            threshold=threshold,
            metadata={"shift": shift, "method": res.method, "n_dofs": td.n_dofs, "hx": td.hx},
        )
        logger.info(
            "tube_solved",
            L=td.L,
            eps=td.eps,
            lambda1=float(res.eigenvalues[0]),
            threshold=threshold,
            below=int(report.below_threshold.size),
        )
        return report

    def detect_discrete(
        self,
        profile: ProfileSpec,
        eps: float,
        L_list: Sequence[float],
        k: int | None = None,
        hx: float | None = None,
    ) -> DetectionReport:
        """
        Solve on every L and classify the eigenvalues of the largest L.

        candidate: below threshold by >= 10x its residual-based error and
        changed by <= 1e-4 relative between the last two L. Below threshold
        otherwise: inconclusive. With a fixed spacing the x-grids are nested,
        so lambda_1(L) must not increase; a violation raises ConsistencyError.
        """
        L_list = [float(L) for L in L_list]
        if len(L_list) < 3:
            raise ConfigError("detect_discrete needs at least 3 truncation lengths")
        if any(b <= a for a, b in zip(L_list, L_list[1:], strict=False)):
            raise ConfigError("L_list must be strictly ascending")
        spacing = hx if hx is not None else self.mesh.h
        for L in L_list:
            ratio = L / spacing
            if abs(ratio - round(ratio)) > 1e-9:
                logger.warning("x_grids_not_nested", L=L, hx=spacing)

        def run(L: float) -> SpectralReport:
            td = self.assemble_tube(profile, L, eps=eps, hx=spacing)
            return self.lowest_modes(td, k)

        reports = tuple(map_ordered(run, L_list))
        lam1 = tuple(float(r.eigenvalues[0]) for r in reports)
        for i in range(1, len(reports)):
            a, b = lam1[i - 1], lam1[i]
            tol = max(MONOTONE_TOL * abs(a), 10.0 * float(reports[i - 1].residuals[0]) * abs(a))
            if b > a + tol:
                raise ConsistencyError(
                    f"lambda_1 increased from {a!r} (L={L_list[i - 1]:g}) "
                    f"to {b!r} (L={L_list[i]:g})"
                )

        last, prev = reports[-1], reports[-2]
        threshold = last.threshold
        classes = []
        for i, lam in enumerate(last.eigenvalues):
            if lam >= threshold:
                classes.append("above_threshold")
                continue
            error = max(float(last.residuals[i]) * abs(lam), 1e-12 * abs(lam))
            margin_ok = threshold - lam >= MARGIN_FACTOR * error
            stable = (
                i < prev.eigenvalues.size
                and abs(lam - prev.eigenvalues[i]) <= STABILIZATION_TOL * abs(lam)
            )
            classes.append("candidate" if margin_ok and stable else "inconclusive")

        classified = SpectralReport(
            L=last.L,
            nx=last.nx,
            eps=last.eps,
            eigenvalues=last.eigenvalues,
            residuals=last.residuals,
            threshold=threshold,
            classifications=tuple(classes),
            metadata=dict(last.metadata),
        )
        logger.info(
            "discrete_spectrum_detected",
            eps=eps,
            candidates=classified.n_candidates,
            lambda1_by_L=lam1,
            threshold=threshold,
        )
        return DetectionReport(
            eps=float(eps),
            L_list=tuple(L_list),
            reports=reports,
            threshold=threshold,
            classified=classified,
            lambda1_by_L=lam1,
        )

    # ------------------------------------------------------------------
    # Separable trial functions
    # ------------------------------------------------------------------

    def separable_form(
        self,
        terms: Sequence[SeparableTerm],
        profile: ProfileSpec,
        eps: float = 1.0,
        support: tuple[float, float] = (-10.0, 10.0),
        points: Sequence[float] = (),
        epsrel: float = 1e-10,
    ) -> FormValue:
        """
        b_eps and ||.||^2 of psi = sum_k a_k(x) u_k(y).

        Section integrals are exact P1 quadratic forms; the x-integral runs
        adaptively over `support` with `points` as known kinks.
        """
        f = self.fem
        U = np.column_stack([t.u for t in terms])

        def gram(mat) -> NDArray:
            return U.T @ (mat @ U)

        Mm, C1m, C2m = gram(f.M), gram(f.C1), gram(f.C2)
        D11m, D22m, D12m, Sm = gram(f.D11), gram(f.D22), gram(f.D12), gram(f.S)

        def integrand(x: float) -> NDArray:
            a = np.array([t.a(x) for t in terms])
            da = np.array([t.da(x) for t in terms])
            F = float(profile.fp(x)) / eps
            G = float(profile.gp(x)) / eps
            form = (
                da @ Mm @ da
                - 2.0 * F * (da @ C1m @ a)
                - 2.0 * G * (da @ C2m @ a)
                + F * F * (a @ D11m @ a)
                + 2.0 * F * G * (a @ D12m @ a)
                + G * G * (a @ D22m @ a)
                + (a @ Sm @ a) / eps**2
            )
            return np.array([form, a @ Mm @ a])

        lo, hi = support
        inner = sorted(p for p in points if lo < p < hi)
        value, error = quad_vec(
            integrand, lo, hi, epsabs=1e-13, epsrel=epsrel, points=inner or None, limit=2000
        )
        error = np.broadcast_to(np.asarray(error, dtype=np.float64), (2,))
        return FormValue(
            form=float(value[0]),
            norm=float(value[1]),
            form_error=float(error[0]),
            norm_error=float(error[1]),
        )

    def thin_form_identity(
        self, profile: ProfileSpec, L: float, nx: int, eps: float
    ) -> float:
        """
        max |K_eps - (K_{f'/eps, eps=1} + (eps^-2 - 1) Mx (x) S)| entrywise.

        Zero up to rounding: the scaled profile carries the shear and only
        the transverse term keeps the 1/eps^2.
        """
        direct = self.assemble_tube(profile, L, nx=nx, eps=eps)
        unit = self.assemble_tube(profile.scaled(eps), L, nx=nx, eps=1.0, check_tails=False)
        nodes = direct.x_nodes
        zeros = np.zeros((nx, 2))
        _, Mx, *_ = _x_matrices(nodes, zeros, zeros)
        correction = sp.kron(Mx, self.fem.S) * (eps**-2 - 1.0)
        diff = (direct.K - unit.K - correction).tocsr()
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    def tensor_oracle(self, L: float, nx: int, k: int) -> NDArray[np.float64]:
        """
        Lowest k eigenvalues of the straight tube from the tensor-sum structure:
        section eigenvalues plus P1 eigenvalues of -d^2/dx^2 on (-L, L).
        """
        nodes = np.linspace(-L, L, nx + 1)
        zeros = np.zeros((nx, 2))
        Kx, Mx, *_ = _x_matrices(nodes, zeros, zeros)
        mu, _ = dense_gevp(Kx, Mx, min(k, nx - 1))
        ks = min(k, self.fem.n)
        E = solve_gevp_smallest(self.fem.S, self.fem.M, k=ks, tol=self.solver.tol).eigenvalues
        sums = np.sort((E[:, None] + mu[None, :]).ravel())
        return sums[:k]
