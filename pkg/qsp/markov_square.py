"""Two-parameter families of square stochastic matrices and their KCE check.

Every family here is ``m = 2``; ``(s, t)`` with ``0 <= s <= t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from qsp.cubic import SquareMatrix, StochKind, compose_square, is_square_stochastic
from qsp.defaults import KCE_TOL, STOCH_TOL
from qsp.errors import (
    E201_SQUARE_PARAM,
    ConstructionError,
    DomainError,
    EvaluationError,
    Finding,
)
from qsp.grid import DEFAULT_SAMPLING, Sampling, TimeGrid, VerificationReport
from qsp.timefn import ClaimTag, TimeFunctionLike, as_function, enforce_claims


def _check_pair(s: float, t: float) -> None:
    if s < 0 or t < s:
        raise DomainError(f"need 0 <= s <= t, got (s, t) = ({s!r}, {t!r})")


def reraise_at(name: str, s: float, t: float, exc: EvaluationError) -> EvaluationError:
    return EvaluationError(f"{name} at (s, t) = ({s!r}, {t!r}): {exc}", t=t, subexpr=exc.subexpr)


@dataclass(frozen=True)
class SquareProcessFamily:
    """``(s, t) -> U^[s,t]`` with declared stochasticity kinds."""

    name: str
    m: int
    evaluator: Callable[[float, float], np.ndarray]
    kinds: tuple[StochKind, ...]
    params: Mapping[str, str] = field(default_factory=dict)
    cutoffs: tuple[float, ...] = ()

    def at(self, s: float, t: float) -> SquareMatrix:
        _check_pair(s, t)
        try:
            return SquareMatrix(self.evaluator(float(s), float(t)))
        except EvaluationError as exc:
            raise reraise_at(self.name, s, t, exc) from exc

    def describe(self) -> dict[str, object]:
        return {
            "family": self.name,
            "m": self.m,
            "kinds": [k.value for k in self.kinds],
            "params": dict(self.params),
            "cutoffs": list(self.cutoffs),
        }


def _bad_param(condition: str, message: str) -> ConstructionError:
    return ConstructionError(Finding(E201_SQUARE_PARAM, condition, message))


def _positive_cutoff(name: str, value: float) -> float:
    value = float(value)
    if not value > 0:
        raise _bad_param(f"{name} > 0", f"cutoff {name} = {value!r} must be positive")
    return value


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


def q1(g: TimeFunctionLike, sampling: Sampling = DEFAULT_SAMPLING) -> SquareProcessFamily:
    """``[[g(s), g(s)], [1-g(s), 1-g(s)]]``; left stochastic, t-independent."""
    g = as_function(g)
    enforce_claims("g", g, [ClaimTag.IN_UNIT_INTERVAL], sampling.t_max, sampling.samples)

    def ev(s: float, t: float) -> np.ndarray:
        gs = g(s)
        return np.array([[gs, gs], [1.0 - gs, 1.0 - gs]])

    return SquareProcessFamily("q1", 2, ev, (StochKind.LEFT,), {"g": g.pretty()})


def q2(psi: TimeFunctionLike, sampling: Sampling = DEFAULT_SAMPLING) -> SquareProcessFamily:
    """``1/2 [[1+r, 1-r], [1-r, 1+r]]`` with ``r = psi(t)/psi(s)``."""
    psi = as_function(psi)
    enforce_claims("psi", psi, [ClaimTag.POSITIVE, ClaimTag.DECREASING], sampling.t_max, sampling.samples)

    def ev(s: float, t: float) -> np.ndarray:
        r = psi(t) / psi(s)
        return 0.5 * np.array([[1.0 + r, 1.0 - r], [1.0 - r, 1.0 + r]])

    return SquareProcessFamily("q2", 2, ev, (StochKind.DOUBLY,), {"psi": psi.pretty()})


def q3(b: float) -> SquareProcessFamily:
    """Identity while ``t < b``, the averaging matrix once ``t >= b``."""
    b = _positive_cutoff("b", b)

    def ev(s: float, t: float) -> np.ndarray:
        return np.eye(2) if t < b else np.full((2, 2), 0.5)

    return SquareProcessFamily("q3", 2, ev, (StochKind.DOUBLY,), {"b": repr(b)}, (b,))


def q4(psi: TimeFunctionLike, sampling: Sampling = DEFAULT_SAMPLING) -> SquareProcessFamily:
    """``[[1, 0], [1-r, r]]`` with ``r = psi(t)/psi(s)``."""
    psi = as_function(psi)
    enforce_claims("psi", psi, [ClaimTag.POSITIVE, ClaimTag.DECREASING], sampling.t_max, sampling.samples)

    def ev(s: float, t: float) -> np.ndarray:
        r = psi(t) / psi(s)
        return np.array([[1.0, 0.0], [1.0 - r, r]])

    return SquareProcessFamily("q4", 2, ev, (StochKind.RIGHT,), {"psi": psi.pretty()})


def q5(f: TimeFunctionLike, sampling: Sampling = DEFAULT_SAMPLING) -> SquareProcessFamily:
    """``[[f(t), 1-f(t)], [f(t), 1-f(t)]]``; depends on t only."""
    f = as_function(f)
    enforce_claims("f", f, [ClaimTag.IN_UNIT_INTERVAL], sampling.t_max, sampling.samples)

    def ev(s: float, t: float) -> np.ndarray:
        ft = f(t)
        return np.array([[ft, 1.0 - ft], [ft, 1.0 - ft]])

    return SquareProcessFamily("q5", 2, ev, (StochKind.RIGHT,), {"f": f.pretty()})


def q6(
    lam: float,
    mu: float,
    theta: TimeFunctionLike,
    sampling: Sampling = DEFAULT_SAMPLING,
) -> SquareProcessFamily:
    """``I + c K`` with ``c = 1 - theta(t)/theta(s)`` and a fixed generator ``K``.

    Requires ``0 < 2 mu < lambda`` (strict).
    """
    lam, mu = float(lam), float(mu)
    if not 0.0 < 2.0 * mu < lam:
        raise _bad_param("0 < 2*mu < lambda", f"lambda = {lam!r}, mu = {mu!r}")
    theta = as_function(theta)
    enforce_claims("theta", theta, [ClaimTag.POSITIVE, ClaimTag.DECREASING], sampling.t_max, sampling.samples)
    p = (lam - 2.0 * mu) / (2.0 * (lam - mu))
    q = lam / (2.0 * (lam - mu))

    def ev(s: float, t: float) -> np.ndarray:
        c = 1.0 - theta(t) / theta(s)
        return np.array([[1.0 - p * c, p * c], [q * c, 1.0 - q * c]])

    return SquareProcessFamily(
        "q6", 2, ev, (StochKind.RIGHT,),
        {"lambda": repr(lam), "mu": repr(mu), "theta": theta.pretty()},
    )


def q7(
    a: float,
    g: TimeFunctionLike,
    sampling: Sampling = DEFAULT_SAMPLING,
) -> SquareProcessFamily:
    """Identity while ``t < a``; ``[[g(t), 1-g(t)], [g(t), 1-g(t)]]`` once ``t >= a``."""
    a = _positive_cutoff("a", a)
    g = as_function(g)
    enforce_claims("g", g, [ClaimTag.IN_UNIT_INTERVAL], sampling.t_max, sampling.samples)

    def ev(s: float, t: float) -> np.ndarray:
        if t < a:
            return np.eye(2)
        gt = g(t)
        return np.array([[gt, 1.0 - gt], [gt, 1.0 - gt]])

    return SquareProcessFamily("q7", 2, ev, (StochKind.RIGHT,), {"a": repr(a), "g": g.pretty()}, (a,))


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def kce_residual_square(
    family: SquareProcessFamily, grid: TimeGrid, tol: float = KCE_TOL
) -> VerificationReport:
    """``max |U^[s,t] - U^[s,tau] U^[tau,t]|`` for every grid triple."""
    entries = []
    for s, tau, t in grid.triples():
        lhs = family.at(s, t)
        rhs = compose_square(family.at(s, tau), family.at(tau, t))
        entries.append(((s, tau, t), lhs.max_abs_diff(rhs)))
    return VerificationReport.from_residuals(f"kce:{family.name}", entries, tol)


def stochasticity_report_square(
    family: SquareProcessFamily,
    grid: TimeGrid,
    tol: float = STOCH_TOL,
    kinds: Sequence[StochKind] | None = None,
) -> VerificationReport:
    """Largest violation of any declared kind (or of *kinds*) at every grid pair."""
    kinds = family.kinds if kinds is None else tuple(kinds)
    entries = []
    for s, t in grid.pairs():
        u = family.at(s, t)
        worst = 0.0
        for kind in kinds:
            check = is_square_stochastic(u, kind, tol)
            worst = max(worst, check.max_deviation, -check.min_entry)
        entries.append(((s, t), worst))
    return VerificationReport.from_residuals(f"stochastic:{family.name}", entries, tol)
