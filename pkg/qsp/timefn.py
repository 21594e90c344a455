"""Scalar time functions: closed parametric variants plus a small expression language.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := number | 't' | func '(' args ')' | '(' expr ')' | '-' factor
    func   := 'exp' | 'sin' | 'cos'        (one argument)
            | 'min' | 'max'                (two arguments, comma separated)

``t`` is the only variable.  Division by a value whose magnitude is below
``NEAR_ZERO_DIVISOR`` is an :class:`EvaluationError`, never infinity.
"""

from __future__ import annotations

import enum
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence, Union

import numpy as np

from qsp.defaults import (
    DEFAULT_CLAIM_SAMPLES,
    DEFAULT_T_MAX,
    MONOTONE_SLACK,
    NEAR_ZERO_DIVISOR,
)
from qsp.errors import (
    E101_CLAIM,
    ConstructionError,
    DomainError,
    EvaluationError,
    ExpressionSyntaxError,
    Finding,
)


def _finite(value: float, t: float, subexpr: str) -> float:
    if not math.isfinite(value):
        raise EvaluationError("non-finite result", t=t, subexpr=subexpr)
    return value


def _divide(num: float, den: float, t: float, subexpr: str) -> float:
    if abs(den) < NEAR_ZERO_DIVISOR:
        raise EvaluationError("division by zero", t=t, subexpr=subexpr)
    return _finite(num / den, t, subexpr)


def _exp(x: float, t: float, subexpr: str) -> float:
    try:
        return _finite(math.exp(x), t, subexpr)
    except OverflowError:
        raise EvaluationError("exp overflow", t=t, subexpr=subexpr) from None


# ---------------------------------------------------------------------------
# Variants
# ---------------------------------------------------------------------------


class ScalarTimeFunction(ABC):
    """A real-valued function of time ``t >= 0``."""

    @abstractmethod
    def _eval(self, t: float) -> float: ...

    @abstractmethod
    def pretty(self) -> str:
        """Text in the expression grammar (PiecewiseConstant excepted)."""

    def __call__(self, t: float) -> float:
        return evaluate(self, t)

    def __str__(self) -> str:
        return self.pretty()


@dataclass(frozen=True)
class Constant(ScalarTimeFunction):
    c: float

    def _eval(self, t: float) -> float:
        return float(self.c)

    def pretty(self) -> str:
        return _num(self.c)


@dataclass(frozen=True)
class Affine(ScalarTimeFunction):
    """p + q*t"""

    p: float
    q: float

    def _eval(self, t: float) -> float:
        return _finite(self.p + self.q * t, t, self.pretty())

    def pretty(self) -> str:
        return f"({_num(self.p)} + {_num(self.q)}*t)"


@dataclass(frozen=True)
class Exponential(ScalarTimeFunction):
    """p + q*exp(lam*t)"""

    p: float
    q: float
    lam: float

    def _eval(self, t: float) -> float:
        text = self.pretty()
        return _finite(self.p + self.q * _exp(self.lam * t, t, text), t, text)

    def pretty(self) -> str:
        return f"({_num(self.p)} + {_num(self.q)}*exp({_num(self.lam)}*t))"


@dataclass(frozen=True)
class Reciprocal(ScalarTimeFunction):
    """1/(p + q*t)"""

    p: float
    q: float

    def _eval(self, t: float) -> float:
        return _divide(1.0, self.p + self.q * t, t, self.pretty())

    def pretty(self) -> str:
        return f"(1/({_num(self.p)} + {_num(self.q)}*t))"


@dataclass(frozen=True)
class Periodic(ScalarTimeFunction):
    """p + q*sin(omega*t + phi)"""

    p: float
    q: float
    omega: float
    phi: float = 0.0

    def _eval(self, t: float) -> float:
        return self.p + self.q * math.sin(self.omega * t + self.phi)

    def pretty(self) -> str:
        return f"({_num(self.p)} + {_num(self.q)}*sin({_num(self.omega)}*t + {_num(self.phi)}))"


@dataclass(frozen=True)
class PiecewiseConstant(ScalarTimeFunction):
    """``values[i]`` on ``[breakpoints[i-1], breakpoints[i])``; left-closed pieces."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.breakpoints) + 1:
            raise DomainError("piecewise constant needs len(values) == len(breakpoints) + 1")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise DomainError("breakpoints must be strictly increasing")

    def _eval(self, t: float) -> float:
        idx = int(np.searchsorted(self.breakpoints, t, side="right"))
        return float(self.values[idx])

    def pretty(self) -> str:
        bps = ", ".join(_num(b) for b in self.breakpoints)
        vals = ", ".join(_num(v) for v in self.values)
        return f"piecewise([{bps}], [{vals}])"


# --- Expression trees ------------------------------------------------------


class Node(ABC):
    @abstractmethod
    def eval(self, t: float) -> float: ...

    @abstractmethod
    def pretty(self) -> str: ...


@dataclass(frozen=True)
class Num(Node):
    value: float

    def eval(self, t: float) -> float:
        return self.value

    def pretty(self) -> str:
        return _num(self.value)


@dataclass(frozen=True)
class Var(Node):
    def eval(self, t: float) -> float:
        return t

    def pretty(self) -> str:
        return "t"


@dataclass(frozen=True)
class Neg(Node):
    operand: Node

    def eval(self, t: float) -> float:
        return -self.operand.eval(t)

    def pretty(self) -> str:
        return f"(-{self.operand.pretty()})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def eval(self, t: float) -> float:
        lhs = self.left.eval(t)
        rhs = self.right.eval(t)
        if self.op == "+":
            return _finite(lhs + rhs, t, self.pretty())
        if self.op == "-":
            return _finite(lhs - rhs, t, self.pretty())
        if self.op == "*":
            return _finite(lhs * rhs, t, self.pretty())
        return _divide(lhs, rhs, t, self.pretty())

    def pretty(self) -> str:
        return f"({self.left.pretty()} {self.op} {self.right.pretty()})"


_FUNCTIONS: dict[str, tuple[int, Callable[..., float]]] = {
    "exp": (1, math.exp),
    "sin": (1, math.sin),
    "cos": (1, math.cos),
    "min": (2, min),
    "max": (2, max),
}


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: tuple[Node, ...]

    def eval(self, t: float) -> float:
        values = [a.eval(t) for a in self.args]
        if self.name == "exp":
            return _exp(values[0], t, self.pretty())
        return _finite(_FUNCTIONS[self.name][1](*values), t, self.pretty())

    def pretty(self) -> str:
        return f"{self.name}({', '.join(a.pretty() for a in self.args)})"


@dataclass(frozen=True)
class Expression(ScalarTimeFunction):
    root: Node
    source: str = ""

    def _eval(self, t: float) -> float:
        return self.root.eval(t)

    def pretty(self) -> str:
        return self.root.pretty()


def _num(value: float) -> str:
    text = repr(float(value))
    return f"({text})" if text.startswith("-") else text


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<NUMBER>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<NAME>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<OP>[-+*/(),])"
    r"|(?P<SPACE>\s+)"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> Iterator[_Token]:
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = match.lastgroup or ""
        if kind != "SPACE":
            yield _Token(kind, match.group(), pos)
        pos = match.end()
    yield _Token("END", "", len(text))


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = list(_tokenize(text))
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _fail(self, message: str, tok: _Token | None = None) -> ExpressionSyntaxError:
        return ExpressionSyntaxError(message, (tok or self.tok).pos, self.text)

    def _expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind != "OP":
            found = self.tok.text or "end of input"
            raise self._fail(f"expected {text!r}, found {found!r}")
        self.i += 1

    def parse(self) -> Node:
        if self.tok.kind == "END":
            raise self._fail("empty expression")
        node = self.expr()
        if self.tok.kind != "END":
            raise self._fail(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.tok.kind == "OP" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        tok = self.tok
        if tok.kind == "NUMBER":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "NAME":
            return self.name()
        if tok.kind == "OP" and tok.text == "(":
            self.i += 1
            node = self.expr()
            self._expect(")")
            return node
        if tok.kind == "OP" and tok.text == "-":
            self.i += 1
            return Neg(self.factor())
        if tok.kind == "END":
            raise self._fail("unexpected end of input")
        raise self._fail(f"unexpected {tok.text!r}")

    def name(self) -> Node:
        tok = self.tok
        self.i += 1
        if tok.text == "t":
            return Var()
        if tok.text not in _FUNCTIONS:
            raise self._fail(f"unknown identifier {tok.text!r}", tok)
        arity = _FUNCTIONS[tok.text][0]
        self._expect("(")
        args = [self.expr()]
        while self.tok.kind == "OP" and self.tok.text == ",":
            self.i += 1
            args.append(self.expr())
        self._expect(")")
        if len(args) != arity:
            raise self._fail(
                f"{tok.text}() takes {arity} argument(s), got {len(args)}", tok
            )
        return Call(tok.text, tuple(args))


def parse(text: str) -> ScalarTimeFunction:
    """Parse *text*; a bare number yields :class:`Constant`."""
    if not isinstance(text, str):
        raise ExpressionSyntaxError("expression must be a string", 0, repr(text))
    root = _Parser(text).parse()
    if isinstance(root, Num):
        return Constant(root.value)
    return Expression(root, text)


TimeFunctionLike = Union[ScalarTimeFunction, float, int, str]


def as_function(value: TimeFunctionLike) -> ScalarTimeFunction:
    """Coerce numbers and expression strings to a :class:`ScalarTimeFunction`."""
    if isinstance(value, ScalarTimeFunction):
        return value
    if isinstance(value, bool):
        raise DomainError("booleans are not time functions")
    if isinstance(value, (int, float)):
        return Constant(float(value))
    if isinstance(value, str):
        return parse(value)
    raise DomainError(f"cannot interpret {value!r} as a time function")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(f: ScalarTimeFunction, t: float, horizon: float | None = None) -> float:
    """Evaluate *f* at *t*; result is always finite."""
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise DomainError(f"time must be finite and nonnegative, got {t!r}")
    if horizon is not None and t > horizon:
        raise DomainError(f"t={t!r} is outside the horizon [0, {horizon}]")
    return _finite(f._eval(t), t, f.pretty())


# ---------------------------------------------------------------------------
# Claims
# ---------------------------------------------------------------------------


class ClaimTag(str, enum.Enum):
    POSITIVE = "positive"
    DECREASING = "decreasing"
    INCREASING = "increasing"
    IN_UNIT_INTERVAL = "in_unit_interval"


@dataclass(frozen=True)
class FunctionClaim:
    tag: ClaimTag
    t_max: float = DEFAULT_T_MAX
    samples: int = DEFAULT_CLAIM_SAMPLES

    def __post_init__(self) -> None:
        if self.samples < 2:
            raise DomainError("a claim needs at least 2 samples")
        if not self.t_max > 0:
            raise DomainError("claim horizon t_max must be positive")

    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.samples)


@dataclass(frozen=True)
class ClaimResult:
    passed: bool
    counterexample: float | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.passed


def validate_claim(f: ScalarTimeFunction, claim: FunctionClaim) -> ClaimResult:
    """Check *claim* on a uniform sample; report the first violating time."""
    previous: float | None = None
    for t in claim.sample_times().tolist():
        try:
            value = evaluate(f, t)
        except EvaluationError as exc:
            return ClaimResult(False, t, str(exc))
        if claim.tag is ClaimTag.POSITIVE and not value > 0:
            return ClaimResult(False, t, f"value {value!r} is not positive")
        if claim.tag is ClaimTag.IN_UNIT_INTERVAL and not (
            -MONOTONE_SLACK <= value <= 1.0 + MONOTONE_SLACK
        ):
            return ClaimResult(False, t, f"value {value!r} is outside [0, 1]")
        if previous is not None:
            if claim.tag is ClaimTag.DECREASING and value > previous + MONOTONE_SLACK:
                return ClaimResult(False, t, f"increases from {previous!r} to {value!r}")
            if claim.tag is ClaimTag.INCREASING and value < previous - MONOTONE_SLACK:
                return ClaimResult(False, t, f"decreases from {previous!r} to {value!r}")
        previous = value
    return ClaimResult(True)


def enforce_claims(
    name: str,
    f: ScalarTimeFunction,
    tags: Sequence[ClaimTag],
    t_max: float = DEFAULT_T_MAX,
    samples: int = DEFAULT_CLAIM_SAMPLES,
) -> None:
    """Raise :class:`ConstructionError` (E101) on the first failing claim."""
    for tag in tags:
        result = validate_claim(f, FunctionClaim(tag, t_max, samples))
        if not result:
            point = (result.counterexample,) if result.counterexample is not None else None
            raise ConstructionError(Finding(
                E101_CLAIM, f"{name} {tag.value}", f"{name} = {f.pretty()}: {result.detail}", point,
            ))
