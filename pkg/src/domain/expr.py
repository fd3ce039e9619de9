"""
Expression language for the profile derivatives f'(x) and g'(x).

Grammar (EBNF), whitespace-insensitive:

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = "-" unary | power ;
    power    = atom [ "^" exponent ] ;
    exponent = [ "-" ] integer | "(" [ "-" ] integer ")" ;
    atom     = number | "x" | func "(" expr ")" | "(" expr ")" ;
    func     = "sin" | "cos" | "tan" | "exp" | "ln" | "tanh" | "sech"
             | "sqrt" | "atan" ;

Only smooth primitives are offered so that symbolic second derivatives
always exist. Nodes are immutable; evaluation is vectorised over numpy arrays.
"""

from __future__ import annotations

import re
from collections.abc import Iterator
from dataclasses import dataclass, field
from functools import singledispatch

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.core.exceptions import (
    ConfigError,
    EvaluationDomainError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
)

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "tanh", "sech", "sqrt", "atan")

# Printing precedence
_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


class Expr:
    """Base class for expression nodes."""

    precedence = _PREC_ATOM

    def children(self) -> tuple[Expr, ...]:
        return ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str = field(default="x")


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr

    precedence = _PREC_NEG

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def precedence(self) -> int:  # type: ignore[override]
        return _PREC_ADD if self.op in "+-" else _PREC_MUL

    def children(self) -> tuple[Expr, ...]:
        return (self.left, self.right)


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int

    precedence = _PREC_POW

    def children(self) -> tuple[Expr, ...]:
        return (self.base,)


@dataclass(frozen=True, eq=True)
class Call(Expr):
    func: str
    arg: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)


X = Var()
ZERO = Num(0.0)
ONE = Num(1.0)


def iter_nodes(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal."""
    yield e
    for child in e.children():
        yield from iter_nodes(child)


def depends_on_x(e: Expr) -> bool:
    return any(isinstance(node, Var) for node in iter_nodes(e))


# ---------------------------------------------------------------------------
# Constant-folding constructors
# ---------------------------------------------------------------------------


def _finite(v: float) -> bool:
    return bool(np.isfinite(v))


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        q = a.value / b.value
        if _finite(q):
            return Num(q)
    if a == ZERO and b != ZERO:
        return ZERO
    if b == ONE:
        return a
    return BinOp("/", a, b)


def power(base: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Num) and not (base.value == 0.0 and n < 0):
        v = base.value**n
        if _finite(v):
            return Num(float(v))
    return Pow(base, n)


def call(func: str, arg: Expr) -> Expr:
    return Call(func, arg)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character '{src[pos]}'", pos)
        kind = m.lastgroup or "op"
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), start))
        pos = m.end()
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    """Recursive-descent parser for the grammar in the module docstring."""

    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def _expect(self, text: str) -> _Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ExpressionSyntaxError(f"expected '{text}', found '{found}'", self.tok.pos)
        return self._advance()

    def parse(self) -> Expr:
        e = self._expr()
        if self.tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected '{self.tok.text}'", self.tok.pos)
        return e

    def _expr(self) -> Expr:
        e = self._term()
        while self.tok.text in ("+", "-"):
            op = self._advance().text
            e = BinOp(op, e, self._term())
        return e

    def _term(self) -> Expr:
        e = self._unary()
        while self.tok.text in ("*", "/"):
            op = self._advance().text
            e = BinOp(op, e, self._unary())
        return e

    def _unary(self) -> Expr:
        if self.tok.text == "-":
            self._advance()
            arg = self._unary()
            # negative literals are numbers, not negations
            return Num(-arg.value) if isinstance(arg, Num) else Neg(arg)
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        if self.tok.text == "^":
            self._advance()
            return Pow(base, self._exponent())
        return base

    def _exponent(self) -> int:
        wrapped = self.tok.text == "("
        if wrapped:
            self._advance()
        sign = 1
        if self.tok.text == "-":
            self._advance()
            sign = -1
        t = self.tok
        if t.kind != "num":
            raise ExpressionSyntaxError("expected integer exponent", t.pos)
        value = float(t.text)
        if not value.is_integer():
            raise ExpressionSyntaxError("exponent must be an integer", t.pos)
        self._advance()
        if wrapped:
            self._expect(")")
        return sign * int(value)

    def _atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self._advance()
            return Num(float(t.text))
        if t.kind == "ident":
            self._advance()
            if t.text == "x":
                return X
            if t.text in FUNCTIONS:
                self._expect("(")
                arg = self._expr()
                self._expect(")")
                return Call(t.text, arg)
            raise UnknownIdentifierError(t.text, t.pos)
        if t.text == "(":
            self._advance()
            e = self._expr()
            self._expect(")")
            return e
        found = t.text or "end of input"
        raise ExpressionSyntaxError(f"unexpected '{found}'", t.pos)


def parse(src: str) -> Expr:
    """Parse expression text into an AST."""
    if not isinstance(src, str) or not src.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return _Parser(src).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _prec(e: Expr) -> int:
    return e.precedence


def to_text(e: Expr) -> str:
    """Print an AST so that parse(to_text(e)) == e."""
    match e:
        case Num(value=v):
            text = repr(float(v))
            return f"({text})" if v < 0 or text.startswith("-") else text
        case Var():
            return "x"
        case Neg(arg=a):
            inner = to_text(a)
            return f"-({inner})" if _prec(a) < _PREC_NEG else f"-{inner}"
        case BinOp(op=op, left=left, right=right):
            p = _prec(e)
            lt = to_text(left)
            rt = to_text(right)
            if _prec(left) < p:
                lt = f"({lt})"
            if _prec(right) <= p:
                rt = f"({rt})"
            return f"{lt} {op} {rt}"
        case Pow(base=b, exponent=n):
            bt = to_text(b)
            if _prec(b) < _PREC_ATOM:
                bt = f"({bt})"
            return f"{bt}^{n}" if n >= 0 else f"{bt}^({n})"
        case Call(func=fn, arg=a):
            return f"{fn}({to_text(a)})"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _check(values: NDArray[np.float64], what: str) -> NDArray[np.float64]:
    if not np.all(np.isfinite(values)):
        raise EvaluationDomainError(f"non-finite value in {what}")
    return values


@singledispatch
def _evaluate(e: Expr, x: NDArray[np.float64]) -> NDArray[np.float64]:
    raise TypeError(f"not an expression node: {e!r}")


@_evaluate.register
def _(e: Num, x):
    return np.full_like(x, e.value)


@_evaluate.register
def _(e: Var, x):
    return x


@_evaluate.register
def _(e: Neg, x):
    return -_evaluate(e.arg, x)


@_evaluate.register
def _(e: BinOp, x):
    a = _evaluate(e.left, x)
    b = _evaluate(e.right, x)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if np.any(b == 0.0):
        raise EvaluationDomainError("division by zero")
    return a / b


@_evaluate.register
def _(e: Pow, x):
    b = _evaluate(e.base, x)
    if e.exponent < 0 and np.any(b == 0.0):
        raise EvaluationDomainError("zero raised to a negative power")
    return _check(b ** float(e.exponent), "power")


@_evaluate.register
def _(e: Call, x):
    u = _evaluate(e.arg, x)
    match e.func:
        case "sin":
            return np.sin(u)
        case "cos":
            return np.cos(u)
        case "tan":
            return _check(np.tan(u), "tan")
        case "exp":
            return _check(np.exp(u), "exp")
        case "ln":
            if np.any(u <= 0.0):
                raise EvaluationDomainError("ln of a nonpositive value")
            return np.log(u)
        case "tanh":
            return np.tanh(u)
        case "sech":
            return 1.0 / np.cosh(u)
        case "sqrt":
            if np.any(u < 0.0):
                raise EvaluationDomainError("sqrt of a negative value")
            return np.sqrt(u)
        case "atan":
            return np.arctan(u)
    raise UnknownIdentifierError(e.func, 0)


def evaluate(e: Expr, x: ArrayLike) -> NDArray[np.float64] | float:
    """
    Evaluate e at x (scalar or array).

    Raises EvaluationDomainError outside the function domain or when any
    intermediate value is not finite.
    """
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    with np.errstate(all="ignore"):
        values = _check(np.asarray(_evaluate(e, xs), dtype=np.float64), "expression")
    return float(values[0]) if scalar else values


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


@singledispatch
def differentiate(e: Expr) -> Expr:
    """Exact symbolic d/dx with constant folding."""
    raise TypeError(f"not an expression node: {e!r}")


@differentiate.register
def _(e: Num) -> Expr:
    return ZERO


@differentiate.register
def _(e: Var) -> Expr:
    return ONE


@differentiate.register
def _(e: Neg) -> Expr:
    return neg(differentiate(e.arg))


@differentiate.register
def _(e: BinOp) -> Expr:
    u, v = e.left, e.right
    du, dv = differentiate(u), differentiate(v)
    if e.op == "+":
        return add(du, dv)
    if e.op == "-":
        return sub(du, dv)
    if e.op == "*":
        return add(mul(du, v), mul(u, dv))
    return div(sub(mul(du, v), mul(u, dv)), power(v, 2))


@differentiate.register
def _(e: Pow) -> Expr:
    n = e.exponent
    return mul(mul(Num(float(n)), power(e.base, n - 1)), differentiate(e.base))


@differentiate.register
def _(e: Call) -> Expr:
    u = e.arg
    du = differentiate(u)
    match e.func:
        case "sin":
            outer = call("cos", u)
        case "cos":
            outer = neg(call("sin", u))
        case "tan":
            outer = div(ONE, power(call("cos", u), 2))
        case "exp":
            outer = call("exp", u)
        case "ln":
            return div(du, u)
        case "tanh":
            outer = power(call("sech", u), 2)
        case "sech":
            outer = neg(mul(call("sech", u), call("tanh", u)))
        case "sqrt":
            return div(du, mul(Num(2.0), call("sqrt", u)))
        case "atan":
            return div(du, add(ONE, power(u, 2)))
        case _:
            raise UnknownIdentifierError(e.func, 0)
    return mul(outer, du)


@singledispatch
def simplify(e: Expr) -> Expr:
    """Rebuild e bottom-up through the folding constructors; calls on constants fold too."""
    return e


@simplify.register
def _(e: Neg) -> Expr:
    return neg(simplify(e.arg))


@simplify.register
def _(e: BinOp) -> Expr:
    build = {"+": add, "-": sub, "*": mul, "/": div}[e.op]
    return build(simplify(e.left), simplify(e.right))


@simplify.register
def _(e: Pow) -> Expr:
    return power(simplify(e.base), e.exponent)


@simplify.register
def _(e: Call) -> Expr:
    arg = simplify(e.arg)
    if isinstance(arg, Num):
        try:
            return Num(float(evaluate(Call(e.func, arg), 0.0)))
        except EvaluationDomainError:
            pass
    return call(e.func, arg)


# ---------------------------------------------------------------------------
# Tail limits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailCheck:
    """Outcome of a tail-limit check at +-X, +-2X, +-4X."""

    passed: bool
    beta: float
    samples: tuple[float, ...]
    deviations: tuple[float, ...]
    reason: str = ""


def tail_limit_check(e: Expr, beta: float, X: float, tol: float) -> TailCheck:
    """
    Check that e(x) -> beta as |x| -> infinity.

    Passes iff every sample at +-X, +-2X, +-4X lies within tol of beta and
    the deviations do not grow with |x| on either side.
    """
    if X <= 0 or tol <= 0:
        raise ConfigError("tail_limit_check requires X > 0 and tol > 0")

    radii = np.array([X, 2.0 * X, 4.0 * X])
    xs = np.concatenate([-radii, radii])
    dev = np.abs(np.asarray(evaluate(e, xs)) - beta)

    left, right = dev[:3], dev[3:]
    reason = ""
    if np.any(dev > tol):
        worst = int(np.argmax(dev))
        reason = f"|e({xs[worst]:g}) - beta| = {dev[worst]:.3e} exceeds tol {tol:g}"
    elif np.any(np.diff(left) > 0.0) or np.any(np.diff(right) > 0.0):
        reason = "deviation grows with |x|"

    return TailCheck(
        passed=not reason,
        beta=float(beta),
        samples=tuple(float(v) for v in xs),
        deviations=tuple(float(v) for v in dev),
        reason=reason,
    )
