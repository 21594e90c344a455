"""Population model on ``I = {0, 1, 2}`` (empty body, female, male) with twin births.

Only the middle layer ``k = 1`` varies; layers ``k = 0`` and ``k = 2`` hold a
single 1 at ``(0, 0)``.  Middle-layer slots::

    P_001 = a      P_011 = b      P_021 = c
    P_101 = alpha  P_111 = beta   P_121 = gamma
    P_201 = u      P_211 = v      P_221 = w

Under the projection product the Kolmogorov-Chapman equation reduces to nine
scalar equations driven by ``f = alpha + beta + gamma``; three solution
branches are built here.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Any, Callable, Literal

import numpy as np

from qsp.cubic import StochKind
from qsp.defaults import BAND_SLACK, CONTINUITY_PROBE, KCE_TOL, NINE_EQ_TOL
from qsp.errors import E401_TWIN_BAND, W401_CONTINUITY, ConstructionError, DomainError, Finding
from qsp.families import CubicProcessFamily, Product
from qsp.grid import DEFAULT_SAMPLING, Sampling, TimeGrid, VerificationReport
from qsp.timefn import ClaimTag, ScalarTimeFunction, TimeFunctionLike, as_function, enforce_claims

logger = logging.getLogger(__name__)

SLOTS: dict[tuple[int, int], str] = {
    (0, 0): "a", (0, 1): "b", (0, 2): "c",
    (1, 0): "alpha", (1, 1): "beta", (1, 2): "gamma",
    (2, 0): "u", (2, 1): "v", (2, 2): "w",
}


class TwinBranch(str, enum.Enum):
    EXTINCTION_A = "a"
    SURVIVAL_B = "b"
    CATACLYSM_C = "c"


@dataclass(frozen=True)
class TwinModelParams:
    """Validated parameters of one branch.

    Branch B uses ``phi`` and the slot functions (``gamma`` derived as
    ``1/phi - alpha - beta``); branch C uses ``alpha0``, ``beta0`` and
    ``cutoff``.  ``phi_inf`` is the declared limit of ``phi``, if any.
    """

    branch: TwinBranch
    phi: ScalarTimeFunction | None = None
    phi_inf: float | None = None
    b: ScalarTimeFunction | None = None
    c: ScalarTimeFunction | None = None
    u: ScalarTimeFunction | None = None
    v: ScalarTimeFunction | None = None
    w: ScalarTimeFunction | None = None
    alpha: ScalarTimeFunction | None = None
    beta: ScalarTimeFunction | None = None
    alpha0: ScalarTimeFunction | None = None
    beta0: ScalarTimeFunction | None = None
    cutoff: float | None = None

    def gamma(self, s: float) -> float:
        assert self.phi is not None and self.alpha is not None and self.beta is not None
        return 1.0 / self.phi(s) - self.alpha(s) - self.beta(s)

    def outflow(self, s: float) -> float:
        """``b + c + u + v + w`` at ``s``."""
        return sum(f(s) for f in (self.b, self.c, self.u, self.v, self.w))


def _layers(middle: np.ndarray) -> np.ndarray:
    out = np.zeros((3, 3, 3))
    out[0, 0, 0] = 1.0
    out[0, 0, 2] = 1.0
    out[:, :, 1] = middle
    return out


_EXTINCT = np.zeros((3, 3))
_EXTINCT[0, 0] = 1.0


def _twin_family(name: str, ev: Callable[[float, float], np.ndarray], params: dict[str, str],
                 p: TwinModelParams, cutoffs: tuple[float, ...] = (),
                 warnings: tuple[Finding, ...] = ()) -> CubicProcessFamily:
    return CubicProcessFamily(
        name, 3, ev, StochKind.ONE_TWO, Product.projection(3), params, cutoffs, warnings, p,
    )


def _fail(condition: str, message: str, point: tuple[float, ...] | None) -> ConstructionError:
    return ConstructionError(Finding(E401_TWIN_BAND, condition, message, point))


# ---------------------------------------------------------------------------
# Branches
# ---------------------------------------------------------------------------


def case_a_family() -> CubicProcessFamily:
    """Extinction: ``a = 1`` and every other middle slot 0, at every pair."""
    p = TwinModelParams(TwinBranch.EXTINCTION_A)
    return _twin_family("twin_a", lambda s, t: _layers(_EXTINCT), {}, p)


def case_b_family(
    phi: TimeFunctionLike,
    alpha: TimeFunctionLike,
    beta: TimeFunctionLike,
    b: TimeFunctionLike = 0.0,
    c: TimeFunctionLike = 0.0,
    u: TimeFunctionLike = 0.0,
    v: TimeFunctionLike = 0.0,
    w: TimeFunctionLike = 0.0,
    phi_inf: float | None = None,
    strict: bool = False,
    sampling: Sampling = DEFAULT_SAMPLING,
) -> CubicProcessFamily:
    """Survival: every slot but ``a`` is ``h(s) * phi(t)``.

    ``a(s, t) = phi(t) (1/phi(t) - 1/phi(s) - (b+c+u+v+w)(s))``.

    Conditions on the sampled pairs: ``1/phi(t) - 1/phi(s) >= (b+c+u+v+w)(s)``,
    ``alpha + beta <= 1/phi``, every slot function nonnegative and every
    ``h(s) * phi(s)`` at most 1.  When
    ``1/phi`` is continuous the first condition cannot hold near ``t = s``
    unless ``b..w`` vanish; grid mode reports that as W401, strict mode
    rejects it.
    """
    fns = {k: as_function(f) for k, f in
           dict(phi=phi, alpha=alpha, beta=beta, b=b, c=c, u=u, v=v, w=w).items()}
    p = TwinModelParams(
        TwinBranch.SURVIVAL_B, phi=fns["phi"], phi_inf=None if phi_inf is None else float(phi_inf),
        b=fns["b"], c=fns["c"], u=fns["u"], v=fns["v"], w=fns["w"],
        alpha=fns["alpha"], beta=fns["beta"],
    )
    if p.phi_inf is not None and p.phi_inf < 0:
        raise _fail("phi_inf >= 0", f"phi_inf = {p.phi_inf!r}", None)
    enforce_claims("phi", fns["phi"], [ClaimTag.POSITIVE], sampling.t_max, sampling.samples)

    times = sampling.claim_times()
    for s in times:
        for name in ("alpha", "beta", "b", "c", "u", "v", "w"):
            value = fns[name](s)
            if value < -BAND_SLACK:
                raise _fail(f"{name} >= 0", f"{name} = {value!r}", (s,))
            if value * p.phi(s) > 1.0 + BAND_SLACK:
                raise _fail(f"{name} * phi <= 1", f"{name} * phi = {value * p.phi(s)!r}", (s,))
        if p.gamma(s) < -BAND_SLACK:
            raise _fail(
                "alpha + beta <= 1/phi",
                f"alpha + beta = {fns['alpha'](s) + fns['beta'](s)!r} exceeds 1/phi = {1.0 / p.phi(s)!r}",
                (s,),
            )

    worst, where = 0.0, None
    for s, t in sampling.pairs():
        excess = p.outflow(s) - (1.0 / p.phi(t) - 1.0 / p.phi(s))
        if excess > BAND_SLACK and excess > worst:
            worst, where = excess, (s, t)
    if where is not None:
        raise _fail(
            "1/phi(t) - 1/phi(s) >= b+c+u+v+w",
            f"short by {worst:.3g}", where,
        )

    warnings: list[Finding] = []
    for s in times:
        total = p.outflow(s)
        if total <= BAND_SLACK:
            continue
        gap = 1.0 / p.phi(s + CONTINUITY_PROBE) - 1.0 / p.phi(s)
        if gap < total:
            finding = Finding(
                W401_CONTINUITY, "1/phi(t) - 1/phi(s) >= b+c+u+v+w as t -> s",
                f"b+c+u+v+w = {total:.3g} but 1/phi grows by {gap:.3g} over {CONTINUITY_PROBE}; "
                "a continuous 1/phi forces b..w = 0",
                (s,),
            )
            if strict:
                raise ConstructionError(Finding(E401_TWIN_BAND, finding.condition, finding.message, finding.point))
            logger.warning("%s", finding)
            warnings.append(finding)
            break

    def ev(s: float, t: float) -> np.ndarray:
        pt, ps = p.phi(t), p.phi(s)
        mid = np.array([
            [pt * (1.0 / pt - 1.0 / ps - p.outflow(s)), fns["b"](s) * pt, fns["c"](s) * pt],
            [fns["alpha"](s) * pt, fns["beta"](s) * pt, p.gamma(s) * pt],
            [fns["u"](s) * pt, fns["v"](s) * pt, fns["w"](s) * pt],
        ])
        return _layers(mid)

    params = {k: f.pretty() for k, f in fns.items()}
    if p.phi_inf is not None:
        params["phi_inf"] = repr(p.phi_inf)
    return _twin_family("twin_b", ev, params, p, warnings=tuple(warnings))


def case_c_family(
    alpha0: TimeFunctionLike,
    beta0: TimeFunctionLike,
    cutoff: float,
    sampling: Sampling = DEFAULT_SAMPLING,
) -> CubicProcessFamily:
    """Cataclysm: ``(alpha0, beta0, 1 - alpha0 - beta0)`` in the female row
    while ``t < cutoff``; extinction from the cutoff on."""
    cutoff = float(cutoff)
    if not cutoff > 0:
        raise _fail("cutoff > 0", f"cutoff = {cutoff!r}", None)
    fa, fb = as_function(alpha0), as_function(beta0)
    for name, f in (("alpha0", fa), ("beta0", fb)):
        enforce_claims(name, f, [ClaimTag.IN_UNIT_INTERVAL], sampling.t_max, sampling.samples)
    for s in sampling.claim_times():
        if s >= cutoff:
            break
        total = fa(s) + fb(s)
        if total > 1.0 + BAND_SLACK:
            raise _fail("alpha0 + beta0 <= 1", f"alpha0 + beta0 = {total!r}", (s,))

    p = TwinModelParams(TwinBranch.CATACLYSM_C, alpha0=fa, beta0=fb, cutoff=cutoff)

    def ev(s: float, t: float) -> np.ndarray:
        if t >= cutoff:
            return _layers(_EXTINCT)
        a0, b0 = fa(s), fb(s)
        mid = np.zeros((3, 3))
        mid[1] = [a0, b0, 1.0 - a0 - b0]
        return _layers(mid)

    params = {"alpha0": fa.pretty(), "beta0": fb.pretty(), "cutoff": repr(cutoff)}
    return _twin_family("twin_c", ev, params, p, (cutoff,))


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def _middle(family: CubicProcessFamily, s: float, t: float) -> np.ndarray:
    arr = family.at(s, t).array
    outer = np.zeros((3, 3))
    outer[0, 0] = 1.0
    if not (np.array_equal(arr[:, :, 0], outer) and np.array_equal(arr[:, :, 2], outer)):
        raise DomainError(f"{family.name} breaks the fixed outer layers at (s, t) = ({s!r}, {t!r})")
    return arr[:, :, 1]


def verify_nine_equations(
    family: CubicProcessFamily, grid: TimeGrid, tol: float = NINE_EQ_TOL
) -> VerificationReport:
    """Residuals of the nine slot equations per triple plus normalization per pair.

    ``a^[s,t] = (a+b+c)^[tau,t] + a^[s,tau] f^[tau,t] + (u+v+w)^[tau,t]`` and
    ``x^[s,t] = x^[s,tau] f^[tau,t]`` for the eight other slots.
    """
    if family.m != 3:
        raise DomainError(f"the twin model needs m = 3, got {family.m}")
    cache: dict[tuple[float, float], np.ndarray] = {}

    def mid(s: float, t: float) -> np.ndarray:
        if (s, t) not in cache:
            cache[(s, t)] = _middle(family, s, t)
        return cache[(s, t)]

    slots = {name: 0.0 for name in SLOTS.values()}
    slots["normalization"] = 0.0
    entries: list[tuple[tuple[float, ...], float]] = []
    for s, tau, t in grid.triples():
        st, s_tau, tau_t = mid(s, t), mid(s, tau), mid(tau, t)
        f = tau_t[1].sum()
        expected = s_tau * f
        expected[0, 0] = tau_t[0].sum() + s_tau[0, 0] * f + tau_t[2].sum()
        diff = np.abs(st - expected)
        for (i, j), name in SLOTS.items():
            slots[name] = max(slots[name], float(diff[i, j]))
        entries.append(((s, tau, t), float(diff.max())))
    for s, t in grid.pairs():
        residual = abs(float(mid(s, t).sum()) - 1.0)
        slots["normalization"] = max(slots["normalization"], residual)
        entries.append(((s, t), residual))
    return VerificationReport.from_residuals(f"nine:{family.name}", entries, tol, slots)


def cantor_checks(
    f: Callable[[float, float], float],
    grid: TimeGrid,
    mode: Literal["first", "second"] = "second",
    tol: float = KCE_TOL,
) -> VerificationReport:
    """Residuals of ``f(s,t) = f(s,tau) f(tau,t)`` (second) or
    ``f(s,t) = f(s,tau) + f(tau,t)`` (first) over the grid triples."""
    if mode not in ("first", "second"):
        raise DomainError(f"unknown Cantor mode {mode!r}")
    entries = []
    for s, tau, t in grid.triples():
        lhs = f(s, t)
        rhs = f(s, tau) * f(tau, t) if mode == "second" else f(s, tau) + f(tau, t)
        entries.append(((s, tau, t), abs(lhs - rhs)))
    return VerificationReport.from_residuals(f"cantor:{mode}", entries, tol)


def persistent_positivity(
    family: CubicProcessFamily, s: float, grid: TimeGrid
) -> tuple[tuple[str, float], ...]:
    """Slots that are positive at some grid ``t > s`` but not at every one.

    Returns ``(slot, t)`` for each first vanishing point; empty means every
    entry that becomes positive stays positive.
    """
    times = [t for t in grid.points if t > s]
    values = np.array([_middle(family, s, t) for t in times])
    out = []
    for (i, j), name in SLOTS.items():
        column = values[:, i, j]
        if (column > 0).any() and not (column > 0).all():
            out.append((name, times[int(np.argmin(column > 0))]))
    return tuple(out)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

NO_LIMIT = "no limit declared"


@dataclass(frozen=True)
class TwinReport:
    s: float
    t: float
    masses: dict[str, float]
    female_female: float
    mixed: float
    male_male: float
    no_offspring: float
    single_female: float
    single_male: float
    twin_to_single_female: float | None
    limit_status: str
    limit_female_female: float | None = None
    limit_mixed: float | None = None
    limit_male_male: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "s": self.s,
            "t": self.t,
            "masses": dict(self.masses),
            "female_female": self.female_female,
            "mixed": self.mixed,
            "male_male": self.male_male,
            "no_offspring": self.no_offspring,
            "single_female": self.single_female,
            "single_male": self.single_male,
            "twin_to_single_female": self.twin_to_single_female,
            "limit_status": self.limit_status,
            "limit_female_female": self.limit_female_female,
            "limit_mixed": self.limit_mixed,
            "limit_male_male": self.limit_male_male,
        }


def twin_report(family: CubicProcessFamily, s: float, t: float) -> TwinReport:
    """Twin probabilities at ``(s, t)`` and their ``t -> infinity`` limits.

    female-female ``P_111``, mixed ``P_121 + P_211``, male-male ``P_221``.
    Limits come from the declared ``phi_inf`` (branch B) or are 0 (branch C,
    which ends in extinction); without ``phi_inf`` they are reported as
    ``"no limit declared"``.
    """
    p = family.origin
    if not isinstance(p, TwinModelParams) or p.branch is TwinBranch.EXTINCTION_A:
        raise DomainError("twin_report needs a branch-B or branch-C twin family")
    mid = _middle(family, s, t)
    masses = {name: float(mid[i, j]) for (i, j), name in SLOTS.items()}
    single_female = float(mid[1, 0] + mid[0, 1])
    report: dict[str, Any] = dict(
        s=float(s), t=float(t), masses=masses,
        female_female=float(mid[1, 1]),
        mixed=float(mid[1, 2] + mid[2, 1]),
        male_male=float(mid[2, 2]),
        no_offspring=float(mid[0, 0]),
        single_female=single_female,
        single_male=float(mid[2, 0] + mid[0, 2]),
        twin_to_single_female=float(mid[1, 1]) / single_female if single_female > 0 else None,
    )
    if p.branch is TwinBranch.CATACLYSM_C:
        report.update(limit_status="extinct after cutoff",
                      limit_female_female=0.0, limit_mixed=0.0, limit_male_male=0.0)
    elif p.phi_inf is None:
        report.update(limit_status=NO_LIMIT)
    else:
        lim = p.phi_inf
        report.update(
            limit_status="declared",
            limit_female_female=lim * p.beta(s),
            limit_mixed=lim * (p.gamma(s) + p.v(s)),
            limit_male_male=lim * p.w(s),
        )
    return TwinReport(**report)


def twin_reports(family: CubicProcessFamily, grid: TimeGrid) -> list[TwinReport]:
    return [twin_report(family, s, t) for s, t in grid.pairs()]
