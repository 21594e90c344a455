"""Time grids and residual reports shared by every verifier."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from qsp.defaults import (
    CUTOFF_MIDPOINT_OFFSET,
    DEFAULT_CLAIM_SAMPLES,
    DEFAULT_GRID_POINTS,
    DEFAULT_GRID_T_MAX,
    DEFAULT_PAIR_SAMPLES,
    DEFAULT_T_MAX,
    KCE_TOL,
)
from qsp.errors import DomainError

Point = tuple[float, ...]


@dataclass(frozen=True)
class Sampling:
    """Where constructors check their validity conditions.

    Single-argument conditions use ``samples`` uniform points on
    ``[0, t_max]``; two-argument conditions use every pair of the coarser
    ``pair_points`` grid plus ``extra`` (typically the verification grid).
    """

    t_max: float = DEFAULT_T_MAX
    samples: int = DEFAULT_CLAIM_SAMPLES
    pair_points: int = DEFAULT_PAIR_SAMPLES
    extra: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not self.t_max > 0:
            raise DomainError("sampling horizon t_max must be positive")
        if self.samples < 2 or self.pair_points < 2:
            raise DomainError("sampling needs at least 2 points")
        object.__setattr__(self, "extra", tuple(float(p) for p in self.extra))

    def claim_times(self) -> list[float]:
        pts = set(np.linspace(0.0, self.t_max, self.samples).tolist())
        pts.update(p for p in self.extra if p >= 0)
        return sorted(pts)

    def pair_times(self) -> list[float]:
        pts = set(np.linspace(0.0, self.t_max, self.pair_points).tolist())
        pts.update(p for p in self.extra if p >= 0)
        return sorted(pts)

    def pairs(self) -> Iterator[tuple[float, float]]:
        return itertools.combinations(self.pair_times(), 2)

    def with_extra(self, points: Iterable[float]) -> "Sampling":
        return Sampling(self.t_max, self.samples, self.pair_points, self.extra + tuple(points))


DEFAULT_SAMPLING = Sampling()


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times in ``[0, t_max]``."""

    points: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = tuple(float(p) for p in self.points)
        if len(pts) < 3:
            raise DomainError(f"a time grid needs at least 3 points, got {len(pts)}")
        if any(not math.isfinite(p) or p < 0 for p in pts):
            raise DomainError("grid points must be finite and nonnegative")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise DomainError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(
        cls,
        t_max: float = DEFAULT_GRID_T_MAX,
        n: int = DEFAULT_GRID_POINTS,
        extra: Iterable[float] = (),
        cutoffs: Iterable[float] = (),
    ) -> "TimeGrid":
        """Uniform points on ``[0, t_max]`` plus *extra* and every cutoff.

        Each cutoff also brings the points ``c - offset`` and ``c + offset``
        so both branches of a piecewise family are sampled.
        """
        if not t_max > 0:
            raise DomainError("t_max must be positive")
        pts = set(np.linspace(0.0, t_max, n).tolist())
        pts.update(float(p) for p in extra)
        for c in cutoffs:
            for p in (c - CUTOFF_MIDPOINT_OFFSET, c, c + CUTOFF_MIDPOINT_OFFSET):
                if 0.0 <= p <= t_max:
                    pts.add(float(p))
        return cls(tuple(sorted(p for p in pts if 0.0 <= p <= t_max)))

    @property
    def t_max(self) -> float:
        return self.points[-1]

    def __len__(self) -> int:
        return len(self.points)

    def pairs(self) -> Iterator[tuple[float, float]]:
        """All ``(s, t)`` with ``s < t``."""
        return itertools.combinations(self.points, 2)

    def triples(self) -> Iterator[tuple[float, float, float]]:
        """All ``(s, tau, t)`` with ``s < tau < t``; degenerate triples excluded."""
        return itertools.combinations(self.points, 3)

    def triple_count(self) -> int:
        return math.comb(len(self.points), 3)

    def shifts(self) -> tuple[float, ...]:
        """Positive offsets ``p_k - p_0`` used by the homogeneity test."""
        return tuple(p - self.points[0] for p in self.points[1:])


@dataclass(frozen=True)
class VerificationReport:
    """Residual statistics of one equation checked over a grid.

    ``slots`` holds the per-component maximum when the checked equation is a
    system (e.g. the nine twin-model equations).
    """

    name: str
    tol: float
    residuals: tuple[tuple[Point, float], ...] = ()
    slots: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_residuals(
        cls,
        name: str,
        entries: Iterable[tuple[Point, float]],
        tol: float = KCE_TOL,
        slots: Mapping[str, float] | None = None,
    ) -> "VerificationReport":
        return cls(name, tol, tuple((tuple(p), float(r)) for p, r in entries), dict(slots or {}))

    @property
    def count(self) -> int:
        return len(self.residuals)

    @property
    def max_residual(self) -> float:
        return max((r for _, r in self.residuals), default=0.0)

    @property
    def failures(self) -> int:
        return sum(1 for _, r in self.residuals if r > self.tol)

    @property
    def worst(self) -> Point | None:
        if not self.residuals:
            return None
        return max(self.residuals, key=lambda item: item[1])[0]

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        """Associative fold: concatenated residuals, slot-wise maxima."""
        if self.tol != other.tol:
            raise DomainError("cannot merge reports with different tolerances")
        slots = dict(self.slots)
        for key, value in other.slots.items():
            slots[key] = max(slots.get(key, 0.0), value)
        name = self.name if self.name == other.name else f"{self.name}+{other.name}"
        return VerificationReport(name, self.tol, self.residuals + other.residuals, slots)

    def to_dict(self) -> dict[str, Any]:
        worst = self.worst
        return {
            "name": self.name,
            "tol": self.tol,
            "count": self.count,
            "max_residual": self.max_residual,
            "failures": self.failures,
            "worst": list(worst) if worst is not None else None,
            "slots": dict(sorted(self.slots.items())),
            "passed": self.passed,
        }


def merge_reports(reports: Sequence[VerificationReport]) -> VerificationReport:
    if not reports:
        raise DomainError("nothing to merge")
    out = reports[0]
    for report in reports[1:]:
        out = out.merge(report)
    return out
