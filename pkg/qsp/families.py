"""Cubic QSP families, the cubic Kolmogorov-Chapman verifier and time classifiers.

Every constructor validates its family's conditions on a :class:`Sampling`
and raises :class:`ConstructionError` with the failing condition and the
worst point it found.  Conditions that can only be warned about are kept
on the family as ``warnings``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol, Sequence

import numpy as np

from qsp.cubic import (
    BinaryOpTable,
    CubicMatrix,
    SquareMatrix,
    StochKind,
    is_square_stochastic,
    is_stochastic,
    maksimov_a0_oracle,
    mul_maksimov0,
    mul_maksimov_a,
)
from qsp.defaults import (
    BAND_SLACK,
    DEFAULT_PERIOD_CANDIDATES,
    DET_THRESHOLD,
    FLOW_SPLIT_TOL,
    HOMOGENEITY_TOL,
    KCE_TOL,
    STOCH_TOL,
)
from qsp.errors import (
    E101_CLAIM,
    E202_LAYER_KIND,
    E301_BAND,
    E302_NEGATIVE,
    E303_FLOW_SINGULAR,
    E304_FLOW_NOT_LEFT,
    E305_SPLIT,
    W301_CUTOFF_COUPLING,
    ConstructionError,
    DomainError,
    EvaluationError,
    Finding,
)
from qsp.grid import DEFAULT_SAMPLING, Sampling, TimeGrid, VerificationReport
from qsp.markov_square import SquareProcessFamily, kce_residual_square, reraise_at
from qsp.timefn import (
    ClaimTag,
    FunctionClaim,
    ScalarTimeFunction,
    TimeFunctionLike,
    as_function,
    enforce_claims,
    validate_claim,
)

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Products and families
# ---------------------------------------------------------------------------


class ProductTag(str, enum.Enum):
    MAKSIMOV0 = "maksimov0"
    MAKSIMOV_A = "maksimov_a"


@dataclass(frozen=True)
class Product:
    tag: ProductTag
    op: BinaryOpTable | None = None

    def __post_init__(self) -> None:
        if (self.tag is ProductTag.MAKSIMOV_A) != (self.op is not None):
            raise DomainError("the a-product needs an operation table; the 0-product none")

    @classmethod
    def zero(cls) -> "Product":
        return cls(ProductTag.MAKSIMOV0)

    @classmethod
    def projection(cls, m: int) -> "Product":
        return cls(ProductTag.MAKSIMOV_A, BinaryOpTable.projection(m))

    @property
    def is_projection(self) -> bool:
        return self.op is not None and self.op == BinaryOpTable.projection(self.op.m)

    def __call__(self, a: CubicMatrix, b: CubicMatrix) -> CubicMatrix:
        if self.op is None:
            return mul_maksimov0(a, b)
        return mul_maksimov_a(a, b, self.op)

    def label(self) -> str:
        if self.op is None:
            return "*0"
        return "*a0" if self.is_projection else "*a"


@dataclass(frozen=True)
class CubicProcessFamily:
    """``(s, t) -> M^[s,t]`` tagged with its stochasticity kind and product.

    ``origin`` keeps the validated parameter object (``M1Params``,
    ``TwinModelParams``...) for closed forms and reports.
    """

    name: str
    m: int
    evaluator: Callable[[float, float], np.ndarray]
    kind: StochKind
    product: Product
    params: Mapping[str, str] = field(default_factory=dict)
    cutoffs: tuple[float, ...] = ()
    warnings: tuple[Finding, ...] = ()
    origin: Any = None

    def __post_init__(self) -> None:
        if self.kind not in (StochKind.ONE_TWO, StochKind.THREE):
            raise DomainError(f"families are (1,2)- or 3-stochastic, not {self.kind.value!r}")

    def at(self, s: float, t: float) -> CubicMatrix:
        if s < 0 or t < s:
            raise DomainError(f"need 0 <= s <= t, got (s, t) = ({s!r}, {t!r})")
        try:
            return CubicMatrix(self.evaluator(float(s), float(t)))
        except EvaluationError as exc:
            raise reraise_at(self.name, s, t, exc) from exc

    def describe(self) -> dict[str, Any]:
        return {
            "family": self.name,
            "m": self.m,
            "kind": self.kind.value,
            "product": self.product.label(),
            "params": dict(self.params),
            "cutoffs": list(self.cutoffs),
            "warnings": [w.to_dict() for w in self.warnings],
        }


def _fail(code: str, condition: str, message: str, point: tuple[float, ...] | None) -> ConstructionError:
    return ConstructionError(Finding(code, condition, message, point))


def _pretty(**fns: ScalarTimeFunction) -> dict[str, str]:
    return {name: f.pretty() for name, f in fns.items()}


def _check_range(
    name: str,
    f: ScalarTimeFunction,
    lower: Callable[[float], float],
    upper: Callable[[float], float],
    times: Sequence[float],
    code: str = E301_BAND,
) -> None:
    """Raise on the worst ``s`` where ``lower(s) <= f(s) <= upper(s)`` fails."""
    worst, where = 0.0, None
    for s in times:
        value = f(s)
        excess = max(lower(s) - value, value - upper(s))
        if excess > BAND_SLACK and excess > worst:
            worst, where = excess, s
    if where is not None:
        raise _fail(
            code, f"bounds on {name}",
            f"{name} = {f(where)!r} lies outside [{lower(where)!r}, {upper(where)!r}]", (where,),
        )


# ---------------------------------------------------------------------------
# (3|0): direct sums of right stochastic square processes
# ---------------------------------------------------------------------------


def direct_sum_30(
    layers: Sequence[SquareProcessFamily],
    grid: TimeGrid | None = None,
    tol: float = KCE_TOL,
) -> CubicProcessFamily:
    """``P_ijk = (layer_j)_ik``; a 3-stochastic process under the 0-product."""
    if not layers:
        raise DomainError("direct_sum_30 needs at least one layer")
    m = layers[0].m
    if len(layers) != m or any(layer.m != m for layer in layers):
        raise DomainError(f"need exactly {m} layers of dimension {m}")
    cutoffs = tuple(sorted({c for layer in layers for c in layer.cutoffs}))
    for j, layer in enumerate(layers):
        if not {StochKind.RIGHT, StochKind.DOUBLY} & set(layer.kinds):
            raise _fail(
                E202_LAYER_KIND, f"layer {j} right stochastic",
                f"layer {j} ({layer.name}) is declared {[k.value for k in layer.kinds]}", None,
            )
    check_grid = grid if grid is not None else TimeGrid.uniform(cutoffs=cutoffs)
    for j, layer in enumerate(layers):
        report = kce_residual_square(layer, check_grid, tol)
        if not report.passed:
            raise _fail(
                E202_LAYER_KIND, f"layer {j} Kolmogorov-Chapman",
                f"layer {j} ({layer.name}) residual {report.max_residual:.3g}", report.worst,
            )

    def ev(s: float, t: float) -> np.ndarray:
        return np.stack([layer.at(s, t).array for layer in layers], axis=1)

    params = {f"layer{j}": layer.name for j, layer in enumerate(layers)}
    for j, layer in enumerate(layers):
        params.update({f"layer{j}.{k}": v for k, v in layer.params.items()})
    return CubicProcessFamily(
        "direct_sum_30", m, ev, StochKind.THREE, Product.zero(), params, cutoffs, origin=tuple(layers),
    )


# ---------------------------------------------------------------------------
# (12|a0): M(1), M(2), M(3)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class M1Params:
    g: ScalarTimeFunction
    u11: ScalarTimeFunction
    u21: ScalarTimeFunction


def m1_family(
    g: TimeFunctionLike,
    u11: TimeFunctionLike,
    u21: TimeFunctionLike,
    sampling: Sampling = DEFAULT_SAMPLING,
) -> CubicProcessFamily:
    """t-independent family with ``P_ij0 = P_ij1 = u_ij(s)``.

    Block i=0 is ``(u11, g - u11)``, block i=1 is ``(u21, 1 - g - u21)``
    (rows j).  Needs ``0 <= u11 <= g`` and ``0 <= u21 <= 1 - g``.
    """
    p = M1Params(as_function(g), as_function(u11), as_function(u21))
    enforce_claims("g", p.g, [ClaimTag.IN_UNIT_INTERVAL], sampling.t_max, sampling.samples)
    times = sampling.claim_times()
    _check_range("u11", p.u11, lambda s: 0.0, p.g, times)
    _check_range("u21", p.u21, lambda s: 0.0, lambda s: 1.0 - p.g(s), times)

    def ev(s: float, t: float) -> np.ndarray:
        gs, a, b = p.g(s), p.u11(s), p.u21(s)
        u = np.array([[a, gs - a], [b, 1.0 - gs - b]])
        return np.repeat(u[:, :, None], 2, axis=2)

    return CubicProcessFamily(
        "m1", 2, ev, StochKind.ONE_TWO, Product.projection(2),
        _pretty(g=p.g, u11=p.u11, u21=p.u21), origin=p,
    )


@dataclass(frozen=True)
class M2Params:
    psi: ScalarTimeFunction
    zeta11: ScalarTimeFunction
    zeta21: ScalarTimeFunction
    gamma11: ScalarTimeFunction
    gamma21: ScalarTimeFunction
    psi_inf: float | None = None


def _m2_matrix(p: M2Params, s: float, t: float) -> np.ndarray:
    ps, pt = p.psi(s), p.psi(t)
    z1, z2, g1, g2 = p.zeta11(s), p.zeta21(s), p.gamma11(s), p.gamma21(s)
    inv = 1.0 / ps
    out = np.empty((2, 2, 2))
    out[0, 0] = [z1 + g1 * pt, z1 - g1 * pt]
    out[0, 1] = [1.0 - z1 + (inv - g1) * pt, 1.0 - z1 - (inv - g1) * pt]
    out[1, 0] = [z2 + g2 * pt, z2 - g2 * pt]
    out[1, 1] = [1.0 - z2 - (inv + g2) * pt, 1.0 - z2 + (g2 + inv) * pt]
    return 0.5 * out


def m2_family(
    psi: TimeFunctionLike,
    zeta11: TimeFunctionLike,
    zeta21: TimeFunctionLike,
    gamma11: TimeFunctionLike,
    gamma21: TimeFunctionLike,
    psi_inf: float | None = None,
    sampling: Sampling = DEFAULT_SAMPLING,
) -> CubicProcessFamily:
    """The (12|a0) family whose contraction is the doubly stochastic ``q2(psi)``.

    For every sampled ``s < t`` the gamma bands

    - ``(1/psi(s) - 1/psi(t))/2 <= gamma11(s) <= (1/psi(s) + 1/psi(t))/2``
    - ``-(1/psi(s) + 1/psi(t))/2 <= gamma21(s) <= (1/psi(s) - 1/psi(t))/2``

    must hold, and every entry must be nonnegative.  With ``psi_inf`` given
    the uniform bands built from ``psi(0)`` and ``psi_inf`` are checked too.
    """
    p = M2Params(
        as_function(psi), as_function(zeta11), as_function(zeta21),
        as_function(gamma11), as_function(gamma21),
        None if psi_inf is None else float(psi_inf),
    )
    enforce_claims("psi", p.psi, [ClaimTag.POSITIVE, ClaimTag.DECREASING], sampling.t_max, sampling.samples)
    for name, f in (("zeta11", p.zeta11), ("zeta21", p.zeta21)):
        enforce_claims(name, f, [ClaimTag.IN_UNIT_INTERVAL], sampling.t_max, sampling.samples)

    worst_band, band_at, band_name = 0.0, None, ""
    worst_neg, neg_at = 0.0, None
    for s, t in sampling.pairs():
        inv_s, inv_t = 1.0 / p.psi(s), 1.0 / p.psi(t)
        g1, g2 = p.gamma11(s), p.gamma21(s)
        for name, value, lo, hi in (
            ("gamma11", g1, 0.5 * (inv_s - inv_t), 0.5 * (inv_s + inv_t)),
            ("gamma21", g2, -0.5 * (inv_s + inv_t), 0.5 * (inv_s - inv_t)),
        ):
            excess = max(lo - value, value - hi)
            if excess > BAND_SLACK and excess > worst_band:
                worst_band, band_at, band_name = excess, (s, t), name
        low = -float(_m2_matrix(p, s, t).min())
        if low > BAND_SLACK and low > worst_neg:
            worst_neg, neg_at = low, (s, t)
    if band_at is not None:
        raise _fail(
            E301_BAND, f"{band_name} band",
            f"{band_name} misses its band by {worst_band:.3g}", band_at,
        )
    if neg_at is not None:
        raise _fail(E302_NEGATIVE, "entries >= 0", f"entry {-worst_neg:.3g} is negative", neg_at)

    if p.psi_inf is not None:
        if not p.psi_inf > 0:
            raise _fail(E301_BAND, "psi_inf > 0", f"psi_inf = {p.psi_inf!r}", None)
        inv_0, inv_inf = 1.0 / p.psi(0.0), 1.0 / p.psi_inf
        times = sampling.claim_times()
        _check_range(
            "gamma11", p.gamma11,
            lambda s: 0.5 * (1.0 / p.psi(s) - inv_inf),
            lambda s: 0.5 * (1.0 / p.psi(s) + inv_inf), times,
        )
        _check_range(
            "gamma21", p.gamma21,
            lambda s: -0.5 * (1.0 / p.psi(s) + inv_inf),
            lambda s: 0.5 * (1.0 / p.psi(s) - inv_0), times,
        )

    params = _pretty(psi=p.psi, zeta11=p.zeta11, zeta21=p.zeta21, gamma11=p.gamma11, gamma21=p.gamma21)
    if p.psi_inf is not None:
        params["psi_inf"] = repr(p.psi_inf)
    return CubicProcessFamily(
        "m2", 2, lambda s, t: _m2_matrix(p, s, t), StochKind.ONE_TWO, Product.projection(2),
        params, origin=p,
    )


@dataclass(frozen=True)
class _Half(ScalarTimeFunction):
    inner: ScalarTimeFunction

    def _eval(self, t: float) -> float:
        return 0.5 * self.inner(t)

    def pretty(self) -> str:
        return f"0.5*({self.inner.pretty()})"


@dataclass(frozen=True)
class M3Params:
    eta11: ScalarTimeFunction
    xi21: ScalarTimeFunction
    kappa11: ScalarTimeFunction
    kappa21: ScalarTimeFunction
    b: float


def m3_family(
    eta11: TimeFunctionLike,
    xi21: TimeFunctionLike,
    b: float,
    kappa11: TimeFunctionLike | None = None,
    kappa21: TimeFunctionLike | None = None,
    sampling: Sampling = DEFAULT_SAMPLING,
) -> CubicProcessFamily:
    """Piecewise family switching at ``t = b`` (the ``t >= b`` branch is closed).

    Before the cutoff the blocks are ``[[eta11, 0], [1-eta11, 0]]`` and
    ``[[0, xi21], [0, 1-xi21]]``; from the cutoff on ``P_ijk`` is
    ``kappa11, 1/2-kappa11, kappa21, 1/2-kappa21`` for both k.

    Across the cutoff the equation holds only with ``kappa11 = eta11/2`` and
    ``kappa21 = xi21/2``, which is the default.  Other in-range kappas are
    accepted with a W301 warning.
    """
    b = float(b)
    if not b > 0:
        raise _fail(E301_BAND, "b > 0", f"cutoff b = {b!r} must be positive", None)
    eta, xi = as_function(eta11), as_function(xi21)
    for name, f in (("eta11", eta), ("xi21", xi)):
        enforce_claims(name, f, [ClaimTag.IN_UNIT_INTERVAL], sampling.t_max, sampling.samples)
    coupled = {"kappa11": _Half(eta), "kappa21": _Half(xi)}
    supplied = {"kappa11": kappa11, "kappa21": kappa21}
    kappas = {k: coupled[k] if v is None else as_function(v) for k, v in supplied.items()}

    times = sampling.claim_times()
    warnings: list[Finding] = []
    for name, f in kappas.items():
        _check_range(name, f, lambda s: 0.0, lambda s: 0.5, times)
        if supplied[name] is None:
            continue
        gap, where = max((abs(f(s) - coupled[name](s)), s) for s in times)
        if gap > BAND_SLACK:
            source = "eta11" if name == "kappa11" else "xi21"
            finding = Finding(
                W301_CUTOFF_COUPLING, f"{name} = {source}/2",
                f"{name} differs from {source}/2 by {gap:.3g}; triples across b={b} will fail",
                (where,),
            )
            logger.warning("%s", finding)
            warnings.append(finding)

    p = M3Params(eta, xi, kappas["kappa11"], kappas["kappa21"], b)

    def ev(s: float, t: float) -> np.ndarray:
        out = np.zeros((2, 2, 2))
        if t < b:
            e, x = p.eta11(s), p.xi21(s)
            out[0, 0, 0], out[0, 1, 0] = e, 1.0 - e
            out[1, 0, 1], out[1, 1, 1] = x, 1.0 - x
        else:
            k1, k2 = p.kappa11(s), p.kappa21(s)
            out[0, 0, :], out[0, 1, :] = k1, 0.5 - k1
            out[1, 0, :], out[1, 1, :] = k2, 0.5 - k2
        return out

    params = _pretty(eta11=eta, xi21=xi, kappa11=p.kappa11, kappa21=p.kappa21)
    params["b"] = repr(b)
    return CubicProcessFamily(
        "m3", 2, ev, StochKind.ONE_TWO, Product.projection(2), params, (b,), tuple(warnings), p,
    )


# ---------------------------------------------------------------------------
# Inverse-flow construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatrixFlow:
    """``t -> A(t)``, invertible at every sampled time."""

    name: str
    m: int
    evaluator: Callable[[float], np.ndarray]
    params: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_function(
        cls,
        m: int,
        fn: Callable[[float], np.ndarray | Sequence[Sequence[float]]],
        name: str = "flow",
        params: Mapping[str, str] | None = None,
        sampling: Sampling = DEFAULT_SAMPLING,
    ) -> "MatrixFlow":
        flow = cls(name, m, lambda t: np.asarray(fn(t), dtype=float), dict(params or {}))
        worst, where = np.inf, None
        for t in sampling.claim_times():
            a = flow.at(t)
            if a.m != m:
                raise DomainError(f"flow {name} returned m={a.m}, expected {m}")
            det = abs(float(np.linalg.det(a.array)))
            if det < worst:
                worst, where = det, t
        if worst <= DET_THRESHOLD:
            raise _fail(
                E303_FLOW_SINGULAR, "|det A(t)| > threshold",
                f"|det A(t)| = {worst:.3g} at or below {DET_THRESHOLD}", (where,),
            )
        return flow

    def at(self, t: float) -> SquareMatrix:
        try:
            return SquareMatrix(self.evaluator(float(t)))
        except EvaluationError as exc:
            raise EvaluationError(f"{self.name} at t={t!r}: {exc}", t=t, subexpr=exc.subexpr) from exc

    def inverse(self, t: float) -> SquareMatrix:
        a = self.at(t).array
        det = float(np.linalg.det(a)) if self.m != 2 else a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if abs(det) <= DET_THRESHOLD:
            raise EvaluationError(f"{self.name} is singular (det {det:.3g})", t=t)
        if self.m == 2:
            return SquareMatrix(np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det)
        return SquareMatrix(np.linalg.inv(a))

    def transition(self, s: float, t: float) -> SquareMatrix:
        """``A(s) A(t)^-1``."""
        return SquareMatrix(self.at(s).array @ self.inverse(t).array)


def p3_flow(
    a: TimeFunctionLike,
    b: TimeFunctionLike,
    sampling: Sampling = DEFAULT_SAMPLING,
) -> MatrixFlow:
    """``A(t) = [[a, 1-b], [1-a, b]]`` with ``det = a + b - 1``.

    Needs a, b in the open interval (0, 1) and either both increasing with
    ``a + b > 1`` or both decreasing with ``a + b < 1`` on the horizon.
    """
    fa, fb = as_function(a), as_function(b)
    for name, f in (("a", fa), ("b", fb)):
        enforce_claims(name, f, [ClaimTag.IN_UNIT_INTERVAL], sampling.t_max, sampling.samples)
    times = sampling.claim_times()
    for name, f in (("a", fa), ("b", fb)):
        for t in times:
            if not 0.0 < f(t) < 1.0:
                raise _fail(E101_CLAIM, f"{name} in (0, 1)", f"{name} = {f(t)!r}", (t,))
    sums = [fa(t) + fb(t) - 1.0 for t in times]

    def monotone(tag: ClaimTag) -> bool:
        claim = FunctionClaim(tag, sampling.t_max, sampling.samples)
        return bool(validate_claim(fa, claim)) and bool(validate_claim(fb, claim))

    increasing = monotone(ClaimTag.INCREASING) and min(sums) > 0
    decreasing = monotone(ClaimTag.DECREASING) and max(sums) < 0
    if not (increasing or decreasing):
        where = times[int(np.argmin(np.abs(sums)))]
        raise _fail(
            E101_CLAIM, "a, b increasing with a+b>1 or decreasing with a+b<1",
            f"a + b - 1 ranges over [{min(sums):.3g}, {max(sums):.3g}]", (where,),
        )

    def ev(t: float) -> np.ndarray:
        at, bt = fa(t), fb(t)
        return np.array([[at, 1.0 - bt], [1.0 - at, bt]])

    return MatrixFlow.from_function(
        2, ev, "p3", {"a": fa.pretty(), "b": fb.pretty(),
                      "variant": "increasing" if increasing else "decreasing"}, sampling,
    )


BetaSplit = Callable[[float], np.ndarray]


def default_split(flow: MatrixFlow) -> BetaSplit:
    """``beta_ijk(s) = a_ik(s) / m``."""
    m = flow.m

    def split(s: float) -> np.ndarray:
        a = flow.at(s).array
        return np.repeat(a[:, None, :], m, axis=1) / m

    return split


def split_from_functions(m: int, beta: Sequence[Sequence[Sequence[TimeFunctionLike]]]) -> BetaSplit:
    """Nested ``beta[i][j][k]`` of time functions evaluated at ``s``."""
    if len(beta) != m or any(len(row) != m or any(len(c) != m for c in row) for row in beta):
        raise DomainError(f"beta must be a {m}x{m}x{m} nested sequence")
    fns = [[[as_function(beta[i][j][k]) for k in range(m)] for j in range(m)] for i in range(m)]

    def split(s: float) -> np.ndarray:
        return np.array([[[f(s) for f in col] for col in row] for row in fns])

    return split


def theorem_a_family(
    flow: MatrixFlow,
    beta: BetaSplit | None = None,
    sampling: Sampling = DEFAULT_SAMPLING,
    name: str = "theorem_a",
    params: Mapping[str, str] | None = None,
    origin: Any = None,
) -> CubicProcessFamily:
    """``P_ijr = sum_k beta_ijk(s) b_kr(t)`` with ``b = A(t)^-1``.

    Conditions checked on every sampled pair:
    (i) ``A(s) A(t)^-1`` is left stochastic;
    (ii) ``sum_j beta_ijk(s) = a_ik(s)`` and every ``P_ijr >= 0``.
    """
    m = flow.m
    split = beta if beta is not None else default_split(flow)

    worst_i, at_i = 0.0, None
    worst_split, at_split = 0.0, None
    worst_neg, at_neg = 0.0, None
    checked_split: set[float] = set()
    for s, t in sampling.pairs():
        u = flow.transition(s, t)
        check = is_square_stochastic(u, StochKind.LEFT, FLOW_SPLIT_TOL)
        excess = max(check.max_deviation, -check.min_entry)
        if not check.ok and excess > worst_i:
            worst_i, at_i = excess, (s, t)
        bs = split(s)
        if s not in checked_split:
            checked_split.add(s)
            gap = float(np.max(np.abs(bs.sum(axis=1) - flow.at(s).array)))
            if gap > FLOW_SPLIT_TOL and gap > worst_split:
                worst_split, at_split = gap, (s,)
        low = -float(np.einsum("ijk,kr->ijr", bs, flow.inverse(t).array).min())
        if low > BAND_SLACK and low > worst_neg:
            worst_neg, at_neg = low, (s, t)
    if at_i is not None:
        raise _fail(
            E304_FLOW_NOT_LEFT, "(i) A(s) A(t)^-1 left stochastic",
            f"violated by {worst_i:.3g}", at_i,
        )
    if at_split is not None:
        raise _fail(E305_SPLIT, "(ii) sum_j beta_ijk = a_ik", f"off by {worst_split:.3g}", at_split)
    if at_neg is not None:
        raise _fail(E305_SPLIT, "(ii) entries >= 0", f"entry {-worst_neg:.3g} is negative", at_neg)

    def ev(s: float, t: float) -> np.ndarray:
        return np.einsum("ijk,kr->ijr", split(s), flow.inverse(t).array)

    merged = {f"flow.{k}": v for k, v in flow.params.items()}
    merged["flow"] = flow.name
    merged["beta"] = "default" if beta is None else "custom"
    merged.update(params or {})
    return CubicProcessFamily(
        name, m, ev, StochKind.ONE_TWO, Product.projection(m), merged, origin=origin or flow,
    )


@dataclass(frozen=True)
class NParams:
    a: ScalarTimeFunction
    b: ScalarTimeFunction
    alpha: ScalarTimeFunction
    beta: ScalarTimeFunction
    gamma: ScalarTimeFunction
    delta: ScalarTimeFunction


def n_family(
    a: TimeFunctionLike,
    b: TimeFunctionLike,
    alpha: TimeFunctionLike,
    beta: TimeFunctionLike,
    gamma: TimeFunctionLike,
    delta: TimeFunctionLike,
    sampling: Sampling = DEFAULT_SAMPLING,
) -> CubicProcessFamily:
    """The inverse-flow family over ``p3_flow(a, b)`` with a four-function split.

    ``alpha, beta`` split the first row of ``A(s)`` and ``gamma, delta`` the
    second: ``beta_000 = alpha``, ``beta_010 = a - alpha``, ``beta_001 = beta``,
    ``beta_011 = 1 - b - beta`` and likewise for ``i = 1``.
    Only the increasing flow with ``a + b > 1`` is accepted.
    """
    p = NParams(*(as_function(f) for f in (a, b, alpha, beta, gamma, delta)))
    flow = p3_flow(p.a, p.b, sampling)
    times = sampling.claim_times()
    if flow.params["variant"] != "increasing":
        low = min(p.a(t) + p.b(t) - 1.0 for t in times)
        raise _fail(E101_CLAIM, "a + b - 1 > 0", f"a + b - 1 reaches {low:.3g}", None)
    zero = lambda s: 0.0  # noqa: E731
    _check_range("alpha", p.alpha, zero, p.a, times)
    _check_range("beta", p.beta, zero, lambda s: 1.0 - p.b(s), times)
    _check_range("gamma", p.gamma, zero, lambda s: 1.0 - p.a(s), times)
    _check_range("delta", p.delta, zero, p.b, times)

    def split(s: float) -> np.ndarray:
        as_, bs = p.a(s), p.b(s)
        al, be, ga, de = p.alpha(s), p.beta(s), p.gamma(s), p.delta(s)
        out = np.empty((2, 2, 2))
        out[0, 0] = [al, be]
        out[0, 1] = [as_ - al, 1.0 - bs - be]
        out[1, 0] = [ga, de]
        out[1, 1] = [1.0 - as_ - ga, bs - de]
        return out

    params = _pretty(a=p.a, b=p.b, alpha=p.alpha, beta=p.beta, gamma=p.gamma, delta=p.delta)
    return theorem_a_family(flow, split, sampling, name="n", params=params, origin=p)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def kce_residual_cubic(
    family: CubicProcessFamily,
    grid: TimeGrid,
    tol: float = KCE_TOL,
    oracle_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> VerificationReport:
    """``max |M^[s,t] - M^[s,tau] * M^[tau,t]|`` over the grid triples.

    With ``oracle_rate > 0`` and the projection product, that share of the
    products is recomputed by :func:`maksimov_a0_oracle`; the largest
    disagreement is reported in the ``oracle`` slot.
    """
    use_oracle = oracle_rate > 0 and family.product.is_projection
    if use_oracle and rng is None:
        rng = np.random.default_rng(0)
    entries = []
    oracle_gap = 0.0
    for s, tau, t in grid.triples():
        left, right = family.at(s, tau), family.at(tau, t)
        product = family.product(left, right)
        entries.append(((s, tau, t), family.at(s, t).max_abs_diff(product)))
        if use_oracle and rng.random() < oracle_rate:
            oracle_gap = max(oracle_gap, product.max_abs_diff(maksimov_a0_oracle(left, right)))
    slots = {"oracle": oracle_gap} if use_oracle else {}
    return VerificationReport.from_residuals(f"kce:{family.name}", entries, tol, slots)


def stochasticity_report_cubic(
    family: CubicProcessFamily,
    grid: TimeGrid,
    tol: float = STOCH_TOL,
    kind: StochKind | None = None,
) -> VerificationReport:
    """Kind violation (sum deviation or negativity) at every grid pair.

    *kind* replaces the declared kind when given.
    """
    kind = family.kind if kind is None else kind
    if not kind.is_cubic:
        raise DomainError(f"{kind.value!r} is not a cubic stochasticity kind")
    entries = []
    for s, t in grid.pairs():
        check = is_stochastic(family.at(s, t), kind, tol)
        entries.append(((s, t), max(check.max_deviation, -check.min_entry, 0.0)))
    return VerificationReport.from_residuals(f"stochastic:{family.name}", entries, tol)


class TwoParameterFamily(Protocol):
    name: str

    def at(self, s: float, t: float) -> Any: ...


class TimeDependence(str, enum.Enum):
    HOMOGENEOUS = "homogeneous"
    PERIODIC_IN_S = "periodic_in_s"
    PERIODIC_IN_T = "periodic_in_t"
    PERIODIC_IN_BOTH = "periodic_in_both"
    GENERAL = "general"


@dataclass(frozen=True)
class TimeClassification:
    kind: TimeDependence
    period: float | None = None
    s_periods: tuple[float, ...] = ()
    t_periods: tuple[float, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "period": self.period,
            "s_periods": list(self.s_periods),
            "t_periods": list(self.t_periods),
        }


def _same(family: TwoParameterFamily, a: tuple[float, float], b: tuple[float, float], tol: float) -> bool:
    return family.at(*a).max_abs_diff(family.at(*b)) <= tol


def classify_time_dependence(
    family: TwoParameterFamily,
    grid: TimeGrid,
    periods: Sequence[float] = DEFAULT_PERIOD_CANDIDATES,
    tol: float = HOMOGENEITY_TOL,
) -> TimeClassification:
    """Classify by comparing shifted evaluations on the grid pairs.

    - homogeneous: ``M(s, t) = M(s+h, t+h)`` for every grid shift ``h``;
    - periodic in t with period T: ``M(s, t) = M(s, t+T)`` for every pair;
    - periodic in s with period T: ``M(s, t) = M(s+T, t)`` for every pair
      with ``s + T <= t`` (at least one such pair must exist).

    A period found for both arguments gives ``PERIODIC_IN_BOTH``.  Results
    are candidates read off a finite grid, not proofs.
    """
    pairs = list(grid.pairs())
    if all(_same(family, (s, t), (s + h, t + h), tol) for s, t in pairs for h in grid.shifts()):
        return TimeClassification(TimeDependence.HOMOGENEOUS)

    t_periods = tuple(
        T for T in periods if all(_same(family, (s, t), (s, t + T), tol) for s, t in pairs)
    )
    s_periods = []
    for T in periods:
        usable = [(s, t) for s, t in pairs if s + T <= t]
        if usable and all(_same(family, (s, t), (s + T, t), tol) for s, t in usable):
            s_periods.append(T)
    both = [T for T in t_periods if T in s_periods]
    if both:
        kind, period = TimeDependence.PERIODIC_IN_BOTH, min(both)
    elif t_periods:
        kind, period = TimeDependence.PERIODIC_IN_T, min(t_periods)
    elif s_periods:
        kind, period = TimeDependence.PERIODIC_IN_S, min(s_periods)
    else:
        kind, period = TimeDependence.GENERAL, None
    return TimeClassification(kind, period, tuple(s_periods), t_periods)
