"""Registry of every constructible family, addressable by name from a run config."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Mapping, Sequence, Union

from qsp import families as fam
from qsp import markov_square as sq
from qsp import twins
from qsp.errors import DomainError, ExpressionSyntaxError
from qsp.families import CubicProcessFamily
from qsp.grid import Sampling, TimeGrid
from qsp.markov_square import SquareProcessFamily
from qsp.timefn import ScalarTimeFunction, as_function, parse

Family = Union[SquareProcessFamily, CubicProcessFamily]
ParamKind = Literal["function", "number"]
ParamValue = Union[ScalarTimeFunction, float]


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: ParamKind = "function"
    required: bool = True

    def signature(self) -> str:
        text = self.name if self.kind == "function" else f"{self.name}:number"
        return text if self.required else f"[{text}]"


@dataclass(frozen=True)
class BuildContext:
    """Everything a builder needs besides its own parameters."""

    sampling: Sampling
    grid: TimeGrid
    kce_tol: float
    strict: bool = False
    layers: tuple[SquareProcessFamily, ...] = ()
    beta: Sequence[Sequence[Sequence[ParamValue]]] | None = None


Builder = Callable[[Mapping[str, ParamValue], BuildContext], Family]


@dataclass(frozen=True)
class FamilyEntry:
    name: str
    kind: str
    product: str
    params: tuple[ParamSpec, ...]
    anchor: str
    builder: Builder = field(repr=False)
    cutoff_params: tuple[str, ...] = ()
    square: bool = False
    twin: bool = False
    needs_layers: bool = False
    accepts_beta: bool = False

    def signature(self) -> str:
        args = [p.signature() for p in self.params]
        if self.needs_layers:
            args.append("layers")
        if self.accepts_beta:
            args.append("[beta]")
        return f"{self.name}({', '.join(args)})"


def _fn(name: str) -> ParamSpec:
    return ParamSpec(name)


def _opt_fn(name: str) -> ParamSpec:
    return ParamSpec(name, required=False)


def _num(name: str, required: bool = True) -> ParamSpec:
    return ParamSpec(name, "number", required)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _build_direct_sum(v: Mapping[str, ParamValue], ctx: BuildContext) -> Family:
    return fam.direct_sum_30(ctx.layers, ctx.grid, ctx.kce_tol)


def _build_theorem_a(v: Mapping[str, ParamValue], ctx: BuildContext) -> Family:
    flow = fam.p3_flow(v["a"], v["b"], ctx.sampling)
    split = fam.split_from_functions(2, ctx.beta) if ctx.beta is not None else None
    return fam.theorem_a_family(flow, split, ctx.sampling)


def _build_twin_b(v: Mapping[str, ParamValue], ctx: BuildContext) -> Family:
    slots = {k: v[k] for k in ("b", "c", "u", "v", "w") if k in v}
    return twins.case_b_family(
        v["phi"], v["alpha"], v["beta"], **slots,
        phi_inf=v.get("phi_inf"), strict=ctx.strict, sampling=ctx.sampling,
    )


_ENTRIES: tuple[FamilyEntry, ...] = (
    FamilyEntry(
        "q1", "left", "matrix", (_fn("g"),),
        "left stochastic, depends on s only",
        lambda v, ctx: sq.q1(v["g"], ctx.sampling), square=True,
    ),
    FamilyEntry(
        "q2", "doubly", "matrix", (_fn("psi"),),
        "doubly stochastic, ratio psi(t)/psi(s) of a positive decreasing psi",
        lambda v, ctx: sq.q2(v["psi"], ctx.sampling), square=True,
    ),
    FamilyEntry(
        "q3", "doubly", "matrix", (_num("b"),),
        "identity before the cutoff b, averaging matrix from b on",
        lambda v, ctx: sq.q3(v["b"]), cutoff_params=("b",), square=True,
    ),
    FamilyEntry(
        "q4", "right", "matrix", (_fn("psi"),),
        "right stochastic with an absorbing first state",
        lambda v, ctx: sq.q4(v["psi"], ctx.sampling), square=True,
    ),
    FamilyEntry(
        "q5", "right", "matrix", (_fn("f"),),
        "right stochastic, depends on t only",
        lambda v, ctx: sq.q5(v["f"], ctx.sampling), square=True,
    ),
    FamilyEntry(
        "q6", "right", "matrix", (_num("lambda"), _num("mu"), _fn("theta")),
        "I + (1 - theta(t)/theta(s)) K with 0 < 2 mu < lambda",
        lambda v, ctx: sq.q6(v["lambda"], v["mu"], v["theta"], ctx.sampling), square=True,
    ),
    FamilyEntry(
        "q7", "right", "matrix", (_num("a"), _fn("g")),
        "identity before the cutoff a, t-only rows from a on",
        lambda v, ctx: sq.q7(v["a"], v["g"], ctx.sampling), cutoff_params=("a",), square=True,
    ),
    FamilyEntry(
        "direct_sum_30", "3", "*0", (),
        "layer j is a right stochastic square process; P_ijk = (layer_j)_ik",
        _build_direct_sum, needs_layers=True,
    ),
    FamilyEntry(
        "m1", "12", "*a0", (_fn("g"), _fn("u11"), _fn("u21")),
        "t-independent (1,2) family with contraction q1(g)",
        lambda v, ctx: fam.m1_family(v["g"], v["u11"], v["u21"], ctx.sampling),
    ),
    FamilyEntry(
        "m2", "12", "*a0",
        (_fn("psi"), _fn("zeta11"), _fn("zeta21"), _fn("gamma11"), _fn("gamma21"), _num("psi_inf", False)),
        "(1,2) family with contraction q2(psi); gamma bands and nonnegativity checked",
        lambda v, ctx: fam.m2_family(
            v["psi"], v["zeta11"], v["zeta21"], v["gamma11"], v["gamma21"],
            v.get("psi_inf"), ctx.sampling,
        ),
    ),
    FamilyEntry(
        "m3", "12", "*a0", (_fn("eta11"), _fn("xi21"), _num("b"), _opt_fn("kappa11"), _opt_fn("kappa21")),
        "(1,2) family switching at the cutoff b; kappa defaults to eta11/2, xi21/2",
        lambda v, ctx: fam.m3_family(
            v["eta11"], v["xi21"], v["b"], v.get("kappa11"), v.get("kappa21"), ctx.sampling,
        ),
        cutoff_params=("b",),
    ),
    FamilyEntry(
        "theorem_a", "12", "*a0", (_fn("a"), _fn("b")),
        "inverse-flow family over A(t) = [[a, 1-b], [1-a, b]]",
        _build_theorem_a, accepts_beta=True,
    ),
    FamilyEntry(
        "n", "12", "*a0", (_fn("a"), _fn("b"), _fn("alpha"), _fn("beta"), _fn("gamma"), _fn("delta")),
        "inverse-flow family with a four-function split of A(s)",
        lambda v, ctx: fam.n_family(
            v["a"], v["b"], v["alpha"], v["beta"], v["gamma"], v["delta"], ctx.sampling,
        ),
    ),
    FamilyEntry(
        "twin_a", "12", "*a0", (),
        "twin-birth model, extinction branch",
        lambda v, ctx: twins.case_a_family(), twin=True,
    ),
    FamilyEntry(
        "twin_b", "12", "*a0",
        (_fn("phi"), _fn("alpha"), _fn("beta"), _opt_fn("b"), _opt_fn("c"), _opt_fn("u"),
         _opt_fn("v"), _opt_fn("w"), _num("phi_inf", False)),
        "twin-birth model, survival branch with entries h(s) phi(t)",
        _build_twin_b, twin=True,
    ),
    FamilyEntry(
        "twin_c", "12", "*a0", (_fn("alpha0"), _fn("beta0"), _num("cutoff")),
        "twin-birth model, cataclysm at the cutoff",
        lambda v, ctx: twins.case_c_family(v["alpha0"], v["beta0"], v["cutoff"], ctx.sampling),
        cutoff_params=("cutoff",), twin=True,
    ),
)

CATALOG: dict[str, FamilyEntry] = {e.name: e for e in _ENTRIES}


def family_names() -> list[str]:
    return list(CATALOG)


def get(name: str) -> FamilyEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise DomainError(f"unknown family {name!r}; known: {', '.join(CATALOG)}") from None


def list_families() -> str:
    """One line per family: signature, kind, product and a short description."""
    rows = [(e.signature(), e.kind, e.product, e.anchor) for e in _ENTRIES]
    width = max(len(r[0]) for r in rows)
    lines = [f"{'family':<{width}}  {'kind':<7} {'product':<7} description"]
    lines += [f"{sig:<{width}}  {kind:<7} {prod:<7} {anchor}" for sig, kind, prod, anchor in rows]
    return "\n".join(lines) + "\n"


def parse_value(spec: ParamSpec, raw: Any) -> ParamValue:
    """Expression strings and numbers become functions; ``number`` params stay floats.

    Raises ``ValueError`` so pydantic reports the offending field.
    """
    if spec.kind == "number":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ValueError(f"{spec.name} must be a plain number, got {raw!r}")
        return float(raw)
    if isinstance(raw, bool) or not isinstance(raw, (str, int, float)):
        raise ValueError(f"{spec.name} must be an expression string or a number, got {raw!r}")
    try:
        return parse(raw) if isinstance(raw, str) else as_function(float(raw))
    except ExpressionSyntaxError as exc:
        raise ValueError(f"{spec.name}: {exc}") from exc


def parse_params(name: str, raw: Mapping[str, Any]) -> dict[str, ParamValue]:
    entry = get(name)
    specs = {p.name: p for p in entry.params}
    unknown = sorted(set(raw) - set(specs))
    if unknown:
        raise ValueError(f"{name} does not take {', '.join(unknown)}; signature {entry.signature()}")
    missing = [p.name for p in entry.params if p.required and p.name not in raw]
    if missing:
        raise ValueError(f"{name} is missing {', '.join(missing)}; signature {entry.signature()}")
    return {key: parse_value(specs[key], value) for key, value in raw.items()}


def cutoffs(name: str, values: Mapping[str, ParamValue]) -> tuple[float, ...]:
    return tuple(float(values[p]) for p in get(name).cutoff_params if p in values)


def build(name: str, values: Mapping[str, ParamValue], ctx: BuildContext) -> Family:
    entry = get(name)
    if entry.needs_layers and not ctx.layers:
        raise DomainError(f"{name} needs layers")
    return entry.builder(values, ctx)
