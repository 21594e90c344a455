"""Exception hierarchy and structured findings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

# Finding codes: machine-readable, stable across versions.
#
# E1xx: time-function claims
E101_CLAIM = "E101"              # Declared property fails on the sampled horizon
# E2xx: square families
E201_SQUARE_PARAM = "E201"       # Square-family parameter out of range
E202_LAYER_KIND = "E202"         # Layer not right stochastic (direct sum)
# E3xx / W3xx: cubic families
E301_BAND = "E301"               # Validity band or range violated
E302_NEGATIVE = "E302"           # Evaluated entry negative beyond slack
E303_FLOW_SINGULAR = "E303"      # |det A(t)| below threshold
E304_FLOW_NOT_LEFT = "E304"      # A(s) A(t)^-1 not left stochastic (condition i)
E305_SPLIT = "E305"              # beta split does not reproduce A(s) (condition ii)
W301_CUTOFF_COUPLING = "W301"    # M3 kappa not coupled to eta/xi at the cutoff
# E4xx / W4xx: twin model
E401_TWIN_BAND = "E401"          # Branch-B or branch-C condition violated
W401_CONTINUITY = "W401"         # Continuity of 1/Phi forces b..w = 0


@dataclass(frozen=True)
class Finding:
    """A structured construction error or warning with a machine-readable code."""

    code: str
    condition: str
    message: str
    point: tuple[float, ...] | None = None

    def __str__(self) -> str:
        where = ""
        if self.point is not None:
            where = " at " + ", ".join(f"{p:.6g}" for p in self.point)
        return f"[{self.code}] {self.condition}: {self.message}{where}"

    @property
    def is_warning(self) -> bool:
        return self.code.startswith("W")

    def to_dict(self) -> dict[str, Any]:
        return {
            "code": self.code,
            "condition": self.condition,
            "message": self.message,
            "point": list(self.point) if self.point is not None else None,
        }


class QSPError(Exception):
    """Base class for every error raised by the library."""


class DomainError(QSPError, ValueError):
    """Bad index, dimension mismatch, wrong stochasticity kind or shape."""


class ExpressionSyntaxError(QSPError):
    """A time-function expression failed to parse."""

    def __init__(self, message: str, position: int, text: str = "") -> None:
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class EvaluationError(QSPError, ArithmeticError):
    """A time function or family could not be evaluated at a point."""

    def __init__(self, message: str, t: float | None = None, subexpr: str = "") -> None:
        self.t = t
        self.subexpr = subexpr
        detail = message
        if subexpr:
            detail += f" in '{subexpr}'"
        if t is not None:
            detail += f" (t={t!r})"
        super().__init__(detail)


class ConstructionError(QSPError):
    """A family rejected its parameters; carries the failing finding."""

    def __init__(self, finding: Finding) -> None:
        self.finding = finding
        super().__init__(str(finding))
