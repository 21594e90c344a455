"""Distribution dynamics on the simplex driven by a cubic process.

Two step rules:

- quadratic (3-stochastic):  ``x'_k = sum_{i,j} P_ijk x_i x_j``
- linear ((1,2)-stochastic): ``x'_k = 1/2 sum_{i,j} (P_kij + P_ikj) x_j``

:func:`trajectory` applies ``M^[s0, t]`` to ``x0`` for every output time
(``one_shot``).  The ``iterated`` mode re-bases at each output time,
``x(t_n) = step(M^[t_{n-1}, t_n], x(t_{n-1}))``; it is an extension, not
the transition law of the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Mapping, Sequence

import numpy as np

from qsp.cubic import CubicMatrix, StochKind, is_stochastic
from qsp.defaults import CLAMP_THRESHOLD, SIMPLEX_TOL, STOCH_TOL
from qsp.errors import DomainError
from qsp.families import CubicProcessFamily, M1Params, M2Params

TrajectoryMode = Literal["one_shot", "iterated"]


@dataclass(frozen=True)
class Distribution:
    """A point of the simplex ``{x : x_i >= 0, sum x_i = 1}``."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        arr = np.asarray(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise DomainError("a distribution needs at least two probabilities")
        if not np.all(np.isfinite(arr)):
            raise DomainError("probabilities must be finite")
        if arr.min() < -CLAMP_THRESHOLD:
            raise DomainError(f"probability {arr.min()!r} is negative")
        if abs(arr.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"probabilities sum to {arr.sum()!r}, not 1")
        object.__setattr__(self, "probs", tuple(arr.tolist()))

    @classmethod
    def of(cls, values: Sequence[float] | np.ndarray) -> "Distribution":
        """Clamp round-off negatives (above ``-CLAMP_THRESHOLD``) and renormalize."""
        arr = np.asarray(values, dtype=float)
        if arr.min() < -CLAMP_THRESHOLD:
            raise DomainError(f"probability {arr.min()!r} is below -{CLAMP_THRESHOLD}")
        if arr.min() < 0:
            arr = np.where(arr < 0, 0.0, arr)
            arr = arr / arr.sum()
        return cls(tuple(arr.tolist()))

    @property
    def m(self) -> int:
        return len(self.probs)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.probs)

    def __getitem__(self, i: int) -> float:
        return self.probs[i]


def _require(p: CubicMatrix, x: Distribution, kind: StochKind, tol: float) -> None:
    if p.m != x.m:
        raise DomainError(f"dimension mismatch: matrix m={p.m}, distribution m={x.m}")
    check = is_stochastic(p, kind, tol)
    if not check:
        raise DomainError(
            f"matrix is not {kind.value}-stochastic "
            f"(max deviation {check.max_deviation:.3g}, min entry {check.min_entry:.3g})"
        )


def step_quadratic(p: CubicMatrix, x: Distribution, tol: float = STOCH_TOL) -> Distribution:
    """``x'_k = sum_{i,j} P_ijk x_i x_j`` for a 3-stochastic ``P``."""
    _require(p, x, StochKind.THREE, tol)
    xv = x.array
    return Distribution.of(np.einsum("ijk,i,j->k", p.array, xv, xv))


def step_linear_12(p: CubicMatrix, x: Distribution, tol: float = STOCH_TOL) -> Distribution:
    """``x'_k = 1/2 sum_{i,j} (P_kij + P_ikj) x_j`` for a (1,2)-stochastic ``P``."""
    _require(p, x, StochKind.ONE_TWO, tol)
    arr, xv = p.array, x.array
    out = 0.5 * (np.einsum("kij,j->k", arr, xv) + np.einsum("ikj,j->k", arr, xv))
    return Distribution.of(out)


StepRule = Callable[[CubicMatrix, Distribution, float], Distribution]


def step_for(family: CubicProcessFamily) -> StepRule:
    """The step rule matching the family's stochasticity kind."""
    if family.kind is StochKind.THREE:
        return step_quadratic
    if family.kind is StochKind.ONE_TWO:
        return step_linear_12
    raise DomainError(f"no step rule for kind {family.kind.value!r}")


@dataclass(frozen=True)
class Trajectory:
    s0: float
    times: tuple[float, ...]
    points: tuple[Distribution, ...]
    mode: TrajectoryMode = "one_shot"
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def rows(self) -> list[tuple[float, ...]]:
        return [(t, *x.probs) for t, x in zip(self.times, self.points)]


def trajectory(
    family: CubicProcessFamily,
    x0: Distribution,
    s0: float,
    times: Sequence[float],
    mode: TrajectoryMode = "one_shot",
    tol: float = STOCH_TOL,
) -> Trajectory:
    """Distribution at every output time, starting from ``x0`` at ``s0``."""
    times = tuple(float(t) for t in times)
    if not times:
        raise DomainError("at least one output time is required")
    if times[0] <= s0:
        raise DomainError(f"first output time {times[0]!r} must exceed s0 = {s0!r}")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DomainError("output times must be strictly increasing")
    if mode not in ("one_shot", "iterated"):
        raise DomainError(f"unknown trajectory mode {mode!r}")
    step = step_for(family)
    points: list[Distribution] = []
    base_s, base_x = float(s0), x0
    for t in times:
        x = step(family.at(base_s, t), base_x, tol)
        points.append(x)
        if mode == "iterated":
            base_s, base_x = t, x
    return Trajectory(float(s0), times, tuple(points), mode, family.describe())


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def closed_form_m1(params: M1Params, s: float) -> Distribution:
    """``(A(s), 1 - A(s))`` with ``A(s) = (g + u11 + u21)(s) / 2``, whatever ``x(s)``."""
    a = 0.5 * (params.g(s) + params.u11(s) + params.u21(s))
    return Distribution.of([a, 1.0 - a])


def closed_form_m2_limit(params: M2Params, s: float, x_s: Distribution) -> Distribution:
    """Limit of the linear evolution as ``t -> infinity``; needs ``psi_inf``.

    ``x1 = ((1+z+G psi_inf) x1(s) + (1+z-G psi_inf) x2(s)) / 4`` with
    ``z = zeta11 + zeta21`` and ``G = gamma11 + gamma21 + 1/psi(s)``.
    """
    if params.psi_inf is None:
        raise DomainError("psi_inf is not declared; the m2 limit distribution is unavailable")
    if x_s.m != 2:
        raise DomainError("the m2 limit needs a two-type distribution")
    z = params.zeta11(s) + params.zeta21(s)
    g = params.gamma11(s) + params.gamma21(s) + 1.0 / params.psi(s)
    x1 = 0.25 * ((1.0 + z + g * params.psi_inf) * x_s[0] + (1.0 + z - g * params.psi_inf) * x_s[1])
    return Distribution.of([x1, 1.0 - x1])
