"""
Longitudinal profile of the waveguide: f'(x), g'(x) and their tail limits.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.core.exceptions import HypothesisError
from src.core.logging import log_hypothesis_event
from src.domain.expr import (
    Expr,
    Num,
    TailCheck,
    depends_on_x,
    differentiate,
    div,
    evaluate,
    parse,
    simplify,
    tail_limit_check,
    to_text,
)


def _as_array(values: NDArray | float, x: ArrayLike) -> NDArray[np.float64]:
    return np.broadcast_to(np.asarray(values, dtype=np.float64), np.shape(x)).copy()


@dataclass(frozen=True, eq=False)
class ProfileSpec:
    """
    The curve r(x) = (x, f(x), g(x)) given through f' and g'.

    beta1, beta2 are the declared limits of f', g' at +-infinity; they are
    checked by validate_tails, never inferred.
    """

    fprime_text: str
    gprime_text: str
    beta1: float
    beta2: float
    fprime: Expr = field(repr=False)
    gprime: Expr = field(repr=False)
    fsecond: Expr = field(repr=False)
    gsecond: Expr = field(repr=False)

    @classmethod
    def from_text(
        cls,
        fprime: str,
        gprime: str = "0",
        beta1: float = 0.0,
        beta2: float = 0.0,
    ) -> ProfileSpec:
        fp = parse(fprime)
        gp = parse(gprime)
        return cls.from_exprs(fp, gp, beta1, beta2, fprime, gprime)

    @classmethod
    def from_exprs(
        cls,
        fp: Expr,
        gp: Expr,
        beta1: float,
        beta2: float,
        fprime_text: str | None = None,
        gprime_text: str | None = None,
    ) -> ProfileSpec:
        return cls(
            fprime_text=fprime_text if fprime_text is not None else to_text(fp),
            gprime_text=gprime_text if gprime_text is not None else to_text(gp),
            beta1=float(beta1),
            beta2=float(beta2),
            fprime=fp,
            gprime=gp,
            fsecond=differentiate(fp),
            gsecond=differentiate(gp),
        )

    @property
    def content_hash(self) -> str:
        """sha256 over the expression texts and declared limits."""
        payload = f"{self.fprime_text}\n{self.gprime_text}\n{self.beta1!r}\n{self.beta2!r}"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @property
    def is_straight(self) -> bool:
        """True when f' and g' are constants (no bending)."""
        return not depends_on_x(simplify(self.fprime)) and not depends_on_x(simplify(self.gprime))

    @property
    def gprime_vanishes(self) -> bool:
        return simplify(self.gprime) == Num(0.0)

    @property
    def fprime_vanishes(self) -> bool:
        return simplify(self.fprime) == Num(0.0)

    def fp(self, x: ArrayLike) -> NDArray[np.float64]:
        return _as_array(evaluate(self.fprime, x), x)

    def gp(self, x: ArrayLike) -> NDArray[np.float64]:
        return _as_array(evaluate(self.gprime, x), x)

    def fpp(self, x: ArrayLike) -> NDArray[np.float64]:
        return _as_array(evaluate(self.fsecond, x), x)

    def gpp(self, x: ArrayLike) -> NDArray[np.float64]:
        return _as_array(evaluate(self.gsecond, x), x)

    def tail_checks(self, X: float, tol: float) -> dict[str, TailCheck]:
        return {
            "fprime": tail_limit_check(self.fprime, self.beta1, X, tol),
            "gprime": tail_limit_check(self.gprime, self.beta2, X, tol),
        }

    def validate_tails(self, X: float, tol: float) -> dict[str, TailCheck]:
        """Raise HypothesisError naming the first expression whose tail check fails."""
        checks = self.tail_checks(X, tol)
        for name, check in checks.items():
            log_hypothesis_event(
                f"tail_limit_{name}",
                check.passed,
                {"X": X, "tol": tol, "reason": check.reason},
            )
            if not check.passed:
                raise HypothesisError(
                    f"tail_limit_{name}",
                    f"tail limit check failed for {name}: {check.reason}",
                )
        return checks

    def scaled(self, eps: float) -> ProfileSpec:
        """Profile with f'/eps, g'/eps and limits beta/eps."""
        if eps == 1.0:
            return self
        s = Num(float(eps))
        return ProfileSpec.from_exprs(
            div(self.fprime, s),
            div(self.gprime, s),
            self.beta1 / eps,
            self.beta2 / eps,
        )
