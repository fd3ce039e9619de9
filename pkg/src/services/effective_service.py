"""
Effective 1D service - potential V(x), bound states of -d^2/dx^2 + V/eps^2,
thin-limit sweeps and the large-coupling sweep of -d^2/dx^2 + mu W.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import minimize_scalar

from src.core.concurrency import map_ordered
from src.core.exceptions import ConfigError, ResolutionError
from src.core.logging import get_logger
from src.domain.expr import Expr, evaluate
from src.domain.models import EffectiveModel, GroundData, ProfileSpec, Schrodinger1D

logger = get_logger(__name__)

EDGE_FACTOR = 1e-6
DRIFT_LIMIT = 1e-3


def symmetric_grid(X: float, hx: float) -> NDArray[np.float64]:
    """Uniform grid on [-X, X] with an even number of intervals of size <= hx."""
    if X <= 0 or hx <= 0:
        raise ConfigError(f"grid needs X > 0 and hx > 0, got X={X}, hx={hx}")
    n = 2 * max(1, math.ceil(X / hx - 1e-9))
    return np.linspace(-X, X, n + 1)


def _lowest_tridiagonal(
    diag: NDArray, off: float, upper: float | None = None, count: int | None = None
) -> tuple[NDArray, NDArray]:
    """
    Eigenpairs of the symmetric tridiagonal matrix (diag, off).

    Either all eigenvalues below `upper` or the `count` smallest.
    """
    e = np.full(diag.size - 1, off)
    if count is not None:
        return eigh_tridiagonal(diag, e, select="i", select_range=(0, count - 1))
    values = eigh_tridiagonal(diag, e, eigvals_only=True, select="v", select_range=(-np.inf, upper))
    if values.size == 0:
        return values, np.zeros((diag.size, 0))
    return eigh_tridiagonal(diag, e, select="i", select_range=(0, values.size - 1))


@dataclass(frozen=True)
class EpsilonSweepRow:
    eps: float
    count: int
    count_upper: int
    eigenvalues: tuple[float, ...]
    eps2_lambda1: float | None


@dataclass(frozen=True)
class EpsilonSweep:
    """Bound-state counts against eps (descending)."""

    rows: tuple[EpsilonSweepRow, ...]
    v_min: float
    monotone: bool

    @property
    def counts(self) -> list[int]:
        return [r.count for r in self.rows]


@dataclass(frozen=True)
class AsymptoticRow:
    mu: float
    hx: float
    eigenvalues: tuple[float, ...]
    ratio: float
    gap: float
    drift: float
    lower_bound_ok: bool


@dataclass(frozen=True)
class AsymptoticSweep:
    """lambda_j(N_mu)/mu against mu, with W_min for reference."""

    j: int
    X: float
    w_min: float
    rows: tuple[AsymptoticRow, ...]

    @property
    def gaps(self) -> list[float]:
        return [abs(r.gap) for r in self.rows]


class EffectiveService:
    """Reduced 1D problems on the ground transverse mode."""

    def build_effective(
        self,
        profile: ProfileSpec,
        coeffs: GroundData | dict,
        X: float,
        hx: float,
        eps: float = 1.0,
        tail_tol: float = 1e-6,
    ) -> EffectiveModel:
        """
        Sample V = A(f'^2-b1^2) + 2B(f'g'-b1 b2) + C(g'^2-b2^2) on [-X, X].

        Raises ConfigError when f' or g' at +-X is farther than tail_tol from
        its declared limit (grid too short).
        """
        if isinstance(coeffs, GroundData):
            coeffs = coeffs.coefficients()
        A, B, C = coeffs["A"], coeffs["B"], coeffs["C"]

        ends = np.array([-X, X])
        tail_dev = max(
            float(np.max(np.abs(profile.fp(ends) - profile.beta1))),
            float(np.max(np.abs(profile.gp(ends) - profile.beta2))),
        )
        if tail_dev > tail_tol:
            raise ConfigError(
                f"grid too short: profile deviates by {tail_dev:.3e} from its limits at +-{X:g}"
            )

        x = symmetric_grid(X, hx)
        model = EffectiveModel(
            profile=profile, A=A, B=B, C=C, x=x, V=np.zeros_like(x), integral=0.0, eps=eps
        )
        V = model.potential(x)
        integral = float(simpson(V, x=x))
        model = EffectiveModel(
            profile=profile, A=A, B=B, C=C, x=x, V=V, integral=integral, eps=eps
        )
        logger.info(
            "effective_potential_built",
            integral=integral,
            v_min=model.v_min,
            argmin=model.argmin,
            points=int(x.size),
        )
        return model

    def solve_bound_states(
        self,
        em: EffectiveModel,
        X: float | None = None,
        hx: float | None = None,
        eps: float | None = None,
    ) -> Schrodinger1D:
        """
        Negative eigenvalues of -d^2/dx^2 + V/eps^2 with Dirichlet ends at +-X.

        Central differences on a uniform grid. Eigenvalues below -tol_edge are
        bound states; those in (-tol_edge, tol_edge) are reported as marginal.
        Defaults to the model's own grid and eps.
        """
        eps = em.eps if eps is None else eps
        if eps <= 0:
            raise ConfigError(f"eps must be positive, got {eps}")
        if X is None and hx is None:
            x, V = em.x, em.V
        else:
            x = symmetric_grid(X or em.X, hx or em.hx)
            V = em.potential(x)
        h = float(x[1] - x[0])

        scale = float(np.max(np.abs(V))) / eps**2
        tol_edge = EDGE_FACTOR * scale
        diag = 2.0 / h**2 + V[1:-1] / eps**2
        off = -1.0 / h**2

        if scale == 0.0:
            values, vectors = np.zeros(0), np.zeros((diag.size, 0))
        else:
            values, vectors = _lowest_tridiagonal(diag, off, upper=-tol_edge)

        marginal: tuple[float, ...] = ()
        if tol_edge > 0:
            near = eigh_tridiagonal(
                diag,
                np.full(diag.size - 1, off),
                eigvals_only=True,
                select="v",
                select_range=(-tol_edge, tol_edge),
            )
            marginal = tuple(float(v) for v in near)
            if marginal:
                logger.warning("marginal_eigenvalue", values=marginal, hint="refine X")

        # grid L2 normalisation and sign fix
        vectors = vectors / math.sqrt(h)
        if vectors.shape[1]:
            peaks = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
            vectors = vectors * np.sign(peaks)[None, :]

        return Schrodinger1D(
            X=float(x[-1]),
            hx=h,
            eps=float(eps),
            x=x,
            eigenvalues=np.asarray(values, dtype=np.float64),
            eigenvectors=vectors,
            tol_edge=tol_edge,
            marginal=marginal,
        )

    def count_vs_epsilon(self, em: EffectiveModel, eps_list: list[float]) -> EpsilonSweep:
        """
        Bound-state counts for each eps (descending); also reports eps^2 * lambda_1
        next to min V, its thin-limit value.
        """
        if any(e <= 0 for e in eps_list):
            raise ConfigError("eps values must be positive")
        if any(b >= a for a, b in zip(eps_list, eps_list[1:], strict=False)):
            raise ConfigError("eps_list must be strictly descending")

        def run(eps: float) -> EpsilonSweepRow:
            sol = self.solve_bound_states(em, eps=eps)
            lam1 = float(sol.eigenvalues[0]) if sol.count else None
            return EpsilonSweepRow(
                eps=float(eps),
                count=sol.count,
                count_upper=sol.count_interval[1],
                eigenvalues=tuple(float(v) for v in sol.eigenvalues),
                eps2_lambda1=None if lam1 is None else eps**2 * lam1,
            )

        rows = tuple(map_ordered(run, list(eps_list)))
        counts = [r.count for r in rows]
        monotone = all(b >= a for a, b in zip(counts, counts[1:], strict=False))
        if not monotone:
            logger.warning("count_not_monotone", counts=counts)
        logger.info("epsilon_sweep_done", counts=counts, v_min=em.v_min)
        return EpsilonSweep(rows=rows, v_min=em.v_min, monotone=monotone)

    @staticmethod
    def w_min(W: Expr, X: float, samples: int = 20001) -> tuple[float, float]:
        """Minimum of W on [-X, X]: dense sampling refined by bounded Brent search."""
        xs = np.linspace(-X, X, samples)
        ws = np.asarray(evaluate(W, xs))
        k = int(np.argmin(ws))
        lo = xs[max(k - 1, 0)]
        hi = xs[min(k + 1, samples - 1)]
        best_x, best_w = float(xs[k]), float(ws[k])
        if hi > lo:
            res = minimize_scalar(
                lambda t: float(evaluate(W, t)), bounds=(lo, hi), method="bounded",
                options={"xatol": 1e-12},
            )
            if res.success and res.fun < best_w:
                best_x, best_w = float(res.x), float(res.fun)
        return best_w, best_x

    def asymptotic_slope(
        self,
        W: Expr,
        mu_list: list[float],
        j: int = 1,
        X: float = 10.0,
    ) -> AsymptoticSweep:
        """
        lambda_j(-d^2/dx^2 + mu W on (-X, X), Dirichlet) / mu for each mu.

        The spacing per mu is hx <= (2 mu max|W|)^(-1/2) / 10; each value is
        recomputed at 2hx and a drift of lambda_j/mu above 1e-3 raises
        ResolutionError.
        """
        if j < 1:
            raise ConfigError("j must be >= 1")
        if not mu_list or any(m <= 0 for m in mu_list):
            raise ConfigError("mu values must be positive")

        w_min, _ = self.w_min(W, X)
        w_abs = float(np.max(np.abs(evaluate(W, np.linspace(-X, X, 20001)))))

        def run(mu: float) -> AsymptoticRow:
            hx = X / 500.0
            if w_abs > 0:
                hx = min(hx, (2.0 * mu * w_abs) ** -0.5 / 10.0)

            def lowest(h: float) -> NDArray:
                x = symmetric_grid(X, h)
                step = float(x[1] - x[0])
                diag = 2.0 / step**2 + mu * np.asarray(evaluate(W, x[1:-1]))
                values, _ = _lowest_tridiagonal(diag, -1.0 / step**2, count=j)
                return values

            fine = lowest(hx)
            coarse = lowest(2.0 * hx)
            drift = abs(fine[j - 1] - coarse[j - 1]) / mu
            if drift > DRIFT_LIMIT:
                raise ResolutionError(
                    f"lambda_{j}/mu drifts by {drift:.2e} between hx={hx:.3e} and 2hx at mu={mu:g}"
                )
            ratio = float(fine[j - 1] / mu)
            lower_ok = bool(fine[0] >= mu * w_min - 1e-9 * max(1.0, abs(mu * w_min)))
            return AsymptoticRow(
                mu=float(mu),
                hx=hx,
                eigenvalues=tuple(float(v) for v in fine),
                ratio=ratio,
                gap=ratio - w_min,
                drift=float(drift),
                lower_bound_ok=lower_ok,
            )

        rows = tuple(map_ordered(run, list(mu_list)))
        logger.info("asymptotic_sweep_done", j=j, w_min=w_min, ratios=[r.ratio for r in rows])
        return AsymptoticSweep(j=j, X=float(X), w_min=w_min, rows=rows)


def get_effective_service() -> EffectiveService:
    """Get effective service instance."""
    return EffectiveService()
