"""
Certificate service - trial-function arguments for bound states.

Each certificate evaluates a concrete trial function and reports its energy
below the threshold with a quadrature error estimate. A "certified" verdict
requires value < -10 x error.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad
from scipy.optimize import brentq

from src.core.concurrency import map_ordered
from src.core.exceptions import ConfigError, ConsistencyError, HypothesisError
from src.core.logging import get_logger, log_hypothesis_event
from src.domain.expr import (
    X,
    Expr,
    Num,
    call,
    differentiate,
    div,
    evaluate,
    mul,
    neg,
    power,
    sub,
    to_text,
)
from src.domain.models import EffectiveModel, GroundData, ProfileSpec
from src.domain.schemas.reports import Certificate
from src.services.tube_service import SeparableTerm, TubeService

logger = get_logger(__name__)

CERTIFY_FACTOR = 10.0
XI_TAIL = 1e-12
XI_MAX_RADIUS = 1e4
BALANCE_TOL = 1e-8
ODE_TOL = 1e-10
SINGULARITY_GAP = 0.1
BUMP_LEVELS = (0.0, 0.1, 0.25, 0.5, 0.75)


def gaussian_xi(shift: float, width: float) -> Expr:
    """exp(-(x - s)^2 / w^2) as an expression."""
    return call("exp", neg(div(power(sub(X, Num(float(shift))), 2), Num(float(width) ** 2))))


def plateau(n: float) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """phi_n = 1 on [-n, n], linear to 0 at +-2n, and its derivative."""

    def phi(x: float) -> float:
        r = abs(x)
        if r <= n:
            return 1.0
        if r >= 2.0 * n:
            return 0.0
        return 2.0 - r / n

    def dphi(x: float) -> float:
        r = abs(x)
        if r <= n or r >= 2.0 * n:
            return 0.0
        return -math.copysign(1.0, x) / n

    return phi, dphi


def _expr_fn(e: Expr, scale: float = 1.0) -> Callable[[float], float]:
    return lambda x: scale * float(evaluate(e, x))


def _xi_radius(xi: Expr) -> float:
    """Smallest R = 2^k with |xi(+-R)| < 1e-12."""
    R = 1.0
    while R <= XI_MAX_RADIUS:
        ends = np.abs(np.asarray(evaluate(xi, np.array([-R, R]))))
        if float(ends.max()) < XI_TAIL:
            return R
        R *= 2.0
    raise HypothesisError(
        "xi_compact_support",
        f"xi tails too large: |xi| >= {XI_TAIL:g} at +-{XI_MAX_RADIUS:g}",
    )


def tau_family(c: float, beta1: float, A_tilde: float) -> Expr:
    """tau_{1,c}(x) = 2 beta1 / (c exp(-4 A~ beta1 x) - 1)."""
    rate = Num(-4.0 * A_tilde * beta1)
    denom = sub(mul(Num(float(c)), call("exp", mul(rate, X))), Num(1.0))
    return div(Num(2.0 * beta1), denom)


def _require_positive_ground(ground: GroundData) -> None:
    if not ground.v1_positive:
        raise ConsistencyError(
            f"ground mode v1 is not positive on the interior (E1={ground.E1:.6g}); refine the section mesh"
        )


@dataclass(frozen=True)
class XiEntry:
    shift: float
    width: float
    J: float
    error: float
    radius: float

    @property
    def label(self) -> str:
        return f"exp(-(x-({self.shift:g}))^2/{self.width:g}^2)"


class CertificateService:
    """
    Certificates on one cross-section.

    thm12 and thm14 only need the effective model; thm13 evaluates the 3D
    form of separable trials through the tube service.
    """

    def __init__(self, tube: TubeService | None = None):
        self.tube = tube

    def _require_tube(self) -> TubeService:
        if self.tube is None:
            raise ConfigError("this certificate needs a cross-section mesh")
        return self.tube

    # ------------------------------------------------------------------
    # Plateau cutoffs
    # ------------------------------------------------------------------

    def plateau_energy(self, em: EffectiveModel, n: int) -> tuple[float, float]:
        """q(n) = 2/n + int V phi_n^2 and the quadrature error."""
        phi, _ = plateau(n)
        inner = sorted({-float(n), float(n), min(max(em.argmin, -n), n)})
        value, error = quad(
            lambda x: float(em.potential(x)) * phi(x) ** 2,
            -2.0 * n,
            2.0 * n,
            points=inner,
            limit=500,
            epsabs=1e-13,
            epsrel=1e-10,
        )
        return 2.0 / n + value, error

    def thm12_certificate(self, em: EffectiveModel, n_max: int) -> Certificate:
        """Smallest n <= n_max with q(n) < 0."""
        if n_max < 1:
            raise ConfigError("n_max must be >= 1")
        if em.X < 2.0 * n_max:
            raise ConfigError(
                f"effective grid [-{em.X:g}, {em.X:g}] shorter than 2*n_max = {2 * n_max}"
            )
        sequence: list[dict] = []
        certified_n = None
        value, error = math.nan, 0.0
        for n in range(1, n_max + 1):
            value, error = self.plateau_energy(em, n)
            sequence.append({"n": n, "q": value, "error": error})
            if value < -CERTIFY_FACTOR * max(error, 1e-14):
                certified_n = n
                break

        verdict = "certified" if certified_n is not None else "inconclusive"
        logger.info("certificate_evaluated", kind="thm12", verdict=verdict, n=certified_n)
        return Certificate(
            kind="thm12",
            parameters={"n_max": n_max, "n": certified_n, "integral_V": em.integral},
            value=value,
            error_estimate=error,
            verdict=verdict,
            details={"q_sequence": sequence, "A": em.A, "B": em.B, "C": em.C},
        )

    def s_eps_identity(
        self,
        profile: ProfileSpec,
        ground: GroundData,
        w: Callable[[float], float],
        dw: Callable[[float], float],
        eps: float = 1.0,
        support: tuple[float, float] = (-10.0, 10.0),
        points: tuple[float, ...] = (),
    ) -> tuple[float, float]:
        """
        Both sides of b_eps(w v1) - E1 ||w v1||^2 / eps^2 = int w'^2 + V w^2 / eps^2.

        The right side uses the section constants of the same discrete v1.
        """
        tube = self._require_tube()
        _require_positive_ground(ground)
        fv = tube.separable_form(
            [SeparableTerm(w, dw, ground.v1)], profile, eps=eps, support=support, points=points
        )
        lhs = fv.shifted(ground.E1 / eps**2)
        em = EffectiveModel(
            profile=profile, A=ground.A, B=ground.B, C=ground.C,
            x=np.zeros(2), V=np.zeros(2), integral=0.0,
        )
        rhs, _ = quad(
            lambda x: dw(x) ** 2 + float(em.potential(x)) * w(x) ** 2 / eps**2,
            support[0],
            support[1],
            points=[p for p in points if support[0] < p < support[1]] or None,
            limit=500,
            epsabs=1e-13,
            epsrel=1e-10,
        )
        return lhs, rhs

    # ------------------------------------------------------------------
    # xi y v1 perturbation
    # ------------------------------------------------------------------

    @staticmethod
    def thm13_functional(
        profile: ProfileSpec, A_tilde: float, xi: Expr, axis: int = 1
    ) -> tuple[float, float]:
        """
        J = int xi (-f''/2 + A~ (f'^2 - beta1^2)) dx and its quadrature error.

        axis=2 uses g'', g', beta2 with A_tilde standing for C~.
        """
        R = _xi_radius(xi)
        if axis == 1:
            d1, d2, beta = profile.fp, profile.fpp, profile.beta1
        else:
            d1, d2, beta = profile.gp, profile.gpp, profile.beta2

        def integrand(x: float) -> float:
            s = float(d1(x))
            return float(evaluate(xi, x)) * (-0.5 * float(d2(x)) + A_tilde * (s * s - beta * beta))

        value, error = quad(integrand, -R, R, limit=500, epsabs=1e-14, epsrel=1e-8)
        return value, error

    def check_thm13_hypotheses(
        self, profile: ProfileSpec, axis: int, tail_X: float = 10.0, tail_tol: float = 1e-6
    ) -> dict[str, float]:
        """Gates: transverse shear vanishes, tail limits, balanced integral, non-constant shear."""
        if axis == 1:
            ok = profile.gprime_vanishes
            log_hypothesis_event("gprime_vanishes", ok, {})
            if not ok:
                raise HypothesisError("gprime_vanishes", "g' must vanish identically")
            d1, beta, name = profile.fp, profile.beta1, "f'"
        else:
            ok = profile.fprime_vanishes
            log_hypothesis_event("fprime_vanishes", ok, {})
            if not ok:
                raise HypothesisError("fprime_vanishes", "f' must vanish identically")
            d1, beta, name = profile.gp, profile.beta2, "g'"

        profile.validate_tails(tail_X, tail_tol)

        xs = np.linspace(-tail_X, tail_X, 4001)
        variance = float(np.var(d1(xs)))
        varies = variance > 1e-24
        log_hypothesis_event("shear_not_constant", varies, {"variance": variance})
        if not varies:
            raise HypothesisError("shear_not_constant", f"{name} is not constant: variance 0")

        bound = 4.0 * tail_X
        signed, _ = quad(
            lambda x: float(d1(x)) ** 2 - beta**2, -bound, bound, points=[0.0], limit=500,
            epsabs=1e-14, epsrel=1e-12,
        )
        total, _ = quad(
            lambda x: abs(float(d1(x)) ** 2 - beta**2), -bound, bound, points=[0.0], limit=500,
            epsabs=1e-14, epsrel=1e-12,
        )
        relative = abs(signed) / total if total > 0 else math.inf
        balanced = relative <= BALANCE_TOL
        log_hypothesis_event("balanced_integral", balanced, {"integral": signed, "relative": relative})
        if not balanced:
            raise HypothesisError(
                "balanced_integral",
                f"int ({name}^2 - beta^2) dx = {signed:.3e} is not zero (relative {relative:.1e})",
            )
        return {"balance_integral": signed, "balance_relative": relative, "variance": variance}

    def xi_table(
        self,
        profile: ProfileSpec,
        A_tilde: float,
        shifts: list[float],
        widths: list[float],
        axis: int = 1,
    ) -> list[XiEntry]:
        """J for every Gaussian of the dictionary, computed concurrently."""
        pairs = [(float(s), float(w)) for w in widths for s in shifts]

        def run(pair: tuple[float, float]) -> XiEntry:
            xi = gaussian_xi(*pair)
            J, err = self.thm13_functional(profile, A_tilde, xi, axis)
            return XiEntry(shift=pair[0], width=pair[1], J=J, error=err, radius=_xi_radius(xi))

        return map_ordered(run, pairs)

    def thm13_certificate(
        self,
        profile: ProfileSpec,
        ground: GroundData,
        shifts: list[float],
        widths: list[float],
        n_max: int = 64,
        axis: int = 1,
        tail_X: float = 10.0,
        tail_tol: float = 1e-6,
    ) -> Certificate:
        """
        Trial psi = phi_n v1 + delta xi y_axis v1 with delta = -J_h / Q.

        J_h is the cross term b(v1, xi y v1) - E1 <v1, xi y v1> of the discrete
        v1; it tends to the symbolic J under refinement. Values are evaluated
        for n = 1, 2, 4, ... up to n_max.
        """
        tube = self._require_tube()
        _require_positive_ground(ground)
        gates = self.check_thm13_hypotheses(profile, axis, tail_X, tail_tol)
        A_tilde = ground.A_tilde if axis == 1 else ground.C_tilde

        table = self.xi_table(profile, A_tilde, shifts, widths, axis)
        j_table = [
            {"xi": e.label, "shift": e.shift, "width": e.width, "J": e.J, "error": e.error}
            for e in table
        ]
        usable = [e for e in table if abs(e.J) > CERTIFY_FACTOR * max(e.error, 1e-14)]
        params = {"axis": axis, "n_max": n_max, "A_tilde": A_tilde, "E1": ground.E1}
        if not usable:
            logger.warning("certificate_inconclusive", kind="thm13", reason="J below error")
            return Certificate(
                kind="thm13",
                parameters=params,
                value=None,
                verdict="inconclusive",
                details={"J_table": j_table, "reason": "all |J| below 10x error", **gates},
            )
        best = max(usable, key=lambda e: abs(e.J))
        xi = gaussian_xi(best.shift, best.width)
        dxi = differentiate(xi)
        coord = tube.fem.coords[:, axis - 1]
        w = coord * ground.v1
        v1 = ground.v1
        R = best.radius
        E1 = ground.E1

        def form(terms: list[SeparableTerm], lo: float, hi: float, points=()) -> tuple[float, float]:
            fv = tube.separable_form(terms, profile, support=(lo, hi), points=points)
            return fv.shifted(E1), fv.form_error + abs(E1) * fv.norm_error

        one = SeparableTerm(lambda x: 1.0, lambda x: 0.0, v1)
        pert = SeparableTerm(_expr_fn(xi), _expr_fn(dxi), w)
        Q, q_err = form([pert], -R, R)
        base, b_err = form([one], -R, R)
        joint, j_err = form([one, pert], -R, R)
        J_h = 0.5 * (joint - base - Q)
        delta = -J_h / Q if Q > 0 else -math.copysign(1.0, J_h)

        sizes = sorted({2**k for k in range(int(math.log2(n_max)) + 1)} | {n_max})
        sequence: list[dict] = []
        certified_n = None
        value, error = math.nan, 0.0
        for n in sizes:
            phi, dphi = plateau(n)
            span = max(2.0 * n, R)
            terms = [
                SeparableTerm(phi, dphi, v1),
                SeparableTerm(_expr_fn(xi, delta), _expr_fn(dxi, delta), w),
            ]
            value, error = form(terms, -span, span, points=(-2.0 * n, -n, n, 2.0 * n))
            sequence.append({"n": n, "value": value, "error": error})
            if value < -CERTIFY_FACTOR * max(error, 1e-14):
                certified_n = n
                break

        n_used = certified_n if certified_n is not None else sizes[-1]
        phi, dphi = plateau(n_used)
        span = max(2.0 * n_used, R)
        flipped, _ = form(
            [
                SeparableTerm(phi, dphi, v1),
                SeparableTerm(_expr_fn(xi, -delta), _expr_fn(dxi, -delta), w),
            ],
            -span,
            span,
            points=(-2.0 * n_used, -n_used, n_used, 2.0 * n_used),
        )

        verdict = "certified" if certified_n is not None else "inconclusive"
        logger.info(
            "certificate_evaluated",
            kind="thm13",
            verdict=verdict,
            n=certified_n,
            J=best.J,
            J_h=J_h,
            Q=Q,
            delta=delta,
        )
        return Certificate(
            kind="thm13",
            parameters={**params, "n": certified_n, "delta": delta, "xi": to_text(xi)},
            value=value,
            error_estimate=error,
            verdict=verdict,
            details={
                "J_table": j_table,
                "J": best.J,
                "J_error": best.error,
                "J_h": J_h,
                "Q": Q,
                "Q_error": q_err,
                "cross_error": j_err + b_err + q_err,
                "value_sequence": sequence,
                "value_flipped_delta": flipped,
                **gates,
            },
        )

    # ------------------------------------------------------------------
    # Disjoint bumps
    # ------------------------------------------------------------------

    @staticmethod
    def negative_interval(em: EffectiveModel, level_fraction: float = 0.0) -> tuple[float, float]:
        """
        Component of {V < 0} around the minimiser, endpoints refined by brentq.

        level_fraction > 0 narrows it to the component of {V <= level_fraction * min V},
        which is still inside {V < 0}.
        """
        V = em.V
        if em.v_min >= 0.0:
            raise HypothesisError("negative_interval", "no negative interval: V >= 0 on the grid")
        if not 0.0 <= level_fraction < 1.0:
            raise ConfigError(f"level_fraction must lie in [0, 1), got {level_fraction}")
        level = level_fraction * em.v_min
        inside = (V < 0.0) & (V <= level)
        k = int(np.argmin(V))
        lo = k
        while lo > 0 and inside[lo - 1]:
            lo -= 1
        hi = k
        while hi < V.size - 1 and inside[hi + 1]:
            hi += 1

        def g(x: float) -> float:
            return float(em.potential(x)) - level

        x = em.x
        left = brentq(g, x[lo - 1], x[lo], xtol=1e-14) if lo > 0 else float(x[0])
        right = brentq(g, x[hi], x[hi + 1], xtol=1e-14) if hi < V.size - 1 else float(x[-1])
        return float(left), float(right)

    def _bump_values(
        self, em: EffectiveModel, eps: float, n: int, interval: tuple[float, float]
    ) -> tuple[list[float], list[float], float, float]:
        left, right = interval
        width = (right - left) / n
        kinetic = math.pi**2 / (2.0 * width)

        def rayleigh(i: int) -> tuple[float, float]:
            x0 = left + i * width
            pot, err = quad(
                lambda x: float(em.potential(x)) * math.sin(math.pi * (x - x0) / width) ** 4,
                x0,
                x0 + width,
                limit=200,
                epsabs=1e-13,
                epsrel=1e-10,
            )
            return kinetic + pot / eps**2, err / eps**2

        results = map_ordered(rayleigh, list(range(n)))
        return [r[0] for r in results], [r[1] for r in results], width, kinetic

    def thm14_trial_count(self, em: EffectiveModel, eps: float, n: int) -> Certificate:
        """
        n disjoint sin^2 bumps of width |I|/n across I; each must have a
        negative Rayleigh value int psi'^2 + V psi^2 / eps^2.

        I runs over the nested intervals of BUMP_LEVELS, all inside {V < 0};
        the reported interval is the one with the most negative worst bump.
        """
        if eps <= 0:
            raise ConfigError(f"eps must be positive, got {eps}")
        if n < 1:
            raise ConfigError("n must be >= 1")

        best: tuple | None = None
        by_level = []
        for fraction in BUMP_LEVELS:
            interval = self.negative_interval(em, fraction)
            values, errors, width, kinetic = self._bump_values(em, eps, n, interval)
            worst = max(values)
            by_level.append({"level_fraction": fraction, "interval": list(interval), "value": worst})
            if best is None or worst < best[0]:
                best = (worst, fraction, interval, values, errors, width, kinetic)

        assert best is not None
        value, fraction, (left, right), values, errors, width, kinetic = best
        error = max(errors)
        passed = all(v < -CERTIFY_FACTOR * max(e, 1e-14) for v, e in zip(values, errors, strict=True))
        verdict = "certified" if passed else "inconclusive"
        logger.info(
            "certificate_evaluated", kind="thm14", verdict=verdict, n=n, eps=eps, level_fraction=fraction
        )
        return Certificate(
            kind="thm14",
            parameters={"n": n, "eps": eps, "interval": [left, right], "level_fraction": fraction},
            value=value,
            error_estimate=error,
            verdict=verdict,
            details={
                "rayleigh": values,
                "errors": errors,
                "bump_width": width,
                "kinetic": kinetic,
                "levels": by_level,
            },
        )

    def first_failing_count(self, em: EffectiveModel, eps: float, n_max: int) -> int | None:
        """Smallest n in 1..n_max whose bump certificate is not certified."""
        for n in range(1, n_max + 1):
            if not self.thm14_trial_count(em, eps, n).certified:
                return n
        return None

    # ------------------------------------------------------------------
    # ODE family
    # ------------------------------------------------------------------

    @staticmethod
    def ode_family_residual(
        c: float, beta1: float, A_tilde: float, x_grid: NDArray[np.float64]
    ) -> Certificate:
        """
        max |-tau' + 2 A~ (tau^2 + 2 beta1 tau)| of tau_{1,c} over x_grid.

        f' = beta1 + tau has f'^2 - beta1^2 of the sign of c; c = 0 gives a
        constant f'.
        """
        if beta1 == 0.0 or A_tilde == 0.0:
            raise ConfigError("ode family needs beta1 != 0 and A_tilde != 0")
        x = np.asarray(x_grid, dtype=np.float64)
        singular = None
        if c > 0:
            singular = math.log(c) / (4.0 * A_tilde * beta1)
            gap = float(np.min(np.abs(x - singular)))
            if gap < SINGULARITY_GAP:
                raise ConfigError(
                    f"grid passes within {gap:.3g} of the singularity x = {singular:.6g}"
                )

        tau = tau_family(c, beta1, A_tilde)
        dtau = differentiate(tau)
        t = np.asarray(evaluate(tau, x))
        dt = np.asarray(evaluate(dtau, x))
        residual = np.abs(-dt + 2.0 * A_tilde * (t * t + 2.0 * beta1 * t))
        value = float(residual.max())

        if c == 0:
            classification = "constant"
        elif c > 0:
            classification = "positive"
        else:
            classification = "negative"
        excess = t * (t + 2.0 * beta1)
        sampled = {"min": float(excess.min()), "max": float(excess.max())}

        verdict = "certified" if value <= ODE_TOL else "inconclusive"
        logger.info("certificate_evaluated", kind="ode-family", verdict=verdict, residual=value)
        return Certificate(
            kind="ode-family",
            parameters={"c": c, "beta1": beta1, "A_tilde": A_tilde, "points": int(x.size)},
            value=value,
            error_estimate=0.0,
            verdict=verdict,
            details={
                "tau": to_text(tau),
                "classification": classification,
                "excess_range": sampled,
                "singularity": singular,
            },
        )


def get_certificate_service(tube: TubeService | None = None) -> CertificateService:
    """Get certificate service instance."""
    return CertificateService(tube)
