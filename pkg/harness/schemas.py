"""Pydantic models for run configurations."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator

from harness import catalog
from harness.catalog import ParamSpec, ParamValue
from qsp.cubic import StochKind
from qsp.defaults import (
    DEFAULT_GRID_POINTS,
    DEFAULT_GRID_T_MAX,
    DEFAULT_T_MAX,
    KCE_TOL,
    MAX_DIMENSION,
    NINE_EQ_TOL,
    SIMPLEX_TOL,
    STOCH_TOL,
)

_STRICT = ConfigDict(extra="forbid")


def _parsed(family: str, raw: dict[str, Any]) -> dict[str, ParamValue]:
    return catalog.parse_params(family, raw)


# ---------------------------------------------------------------------------
# Grid / tolerances
# ---------------------------------------------------------------------------


class GridSpec(BaseModel):
    model_config = _STRICT

    t_max: float = DEFAULT_GRID_T_MAX
    points: int = DEFAULT_GRID_POINTS
    extra_points: list[float] = []

    @field_validator("t_max")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError(f"t_max must be positive: {v}")
        return v

    @field_validator("points")
    @classmethod
    def _enough_points(cls, v: int) -> int:
        if v < 3:
            raise ValueError(f"a grid needs at least 3 points, got {v}")
        return v

    @model_validator(mode="after")
    def _extra_in_range(self) -> "GridSpec":
        for p in self.extra_points:
            if not 0.0 <= p <= self.t_max:
                raise ValueError(f"extra point {p} is outside [0, {self.t_max}]")
        return self


class Tolerances(BaseModel):
    model_config = _STRICT

    kce_tol: float = KCE_TOL
    stoch_tol: float = STOCH_TOL
    nine_tol: float = NINE_EQ_TOL

    @field_validator("kce_tol", "stoch_tol", "nine_tol")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError(f"tolerances must be positive: {v}")
        return v


# ---------------------------------------------------------------------------
# Simulation / output
# ---------------------------------------------------------------------------


class SimulationSpec(BaseModel):
    model_config = _STRICT

    x0: list[float]
    s0: float = 0.0
    times: list[float]
    mode: Literal["one_shot", "iterated"] = "one_shot"

    @field_validator("x0")
    @classmethod
    def _on_simplex(cls, v: list[float]) -> list[float]:
        if not 2 <= len(v) <= MAX_DIMENSION:
            raise ValueError(f"x0 needs between 2 and {MAX_DIMENSION} entries, got {len(v)}")
        if min(v) < 0 or abs(sum(v) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"x0 must be a probability vector: {v}")
        return v

    @field_validator("s0")
    @classmethod
    def _nonnegative(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"s0 must be nonnegative: {v}")
        return v

    @model_validator(mode="after")
    def _times_after_s0(self) -> "SimulationSpec":
        if not self.times:
            raise ValueError("times must be non-empty")
        if self.times[0] <= self.s0:
            raise ValueError(f"first output time {self.times[0]} must exceed s0 = {self.s0}")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        return self


class OutputSpec(BaseModel):
    model_config = _STRICT

    report: Optional[str] = None
    trajectory: Optional[str] = None
    matrix: Optional[str] = None
    matrix_format: Literal["json", "text"] = "json"
    twin_report: Optional[str] = None


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


class LayerSpec(BaseModel):
    """A square family used as one layer of ``direct_sum_30``."""

    model_config = _STRICT

    family: str
    params: dict[str, Any] = {}

    @field_validator("family")
    @classmethod
    def _square_family(cls, v: str) -> str:
        if v not in catalog.CATALOG or not catalog.CATALOG[v].square:
            square = [e.name for e in catalog.CATALOG.values() if e.square]
            raise ValueError(f"layer family must be one of {square}: {v!r}")
        return v

    @field_validator("params")
    @classmethod
    def _params_parse(cls, v: dict[str, Any], info: ValidationInfo) -> dict[str, Any]:
        if "family" in info.data:
            _parsed(info.data["family"], v)
        return v

    @property
    def values(self) -> dict[str, ParamValue]:
        return _parsed(self.family, self.params)


class RunConfig(BaseModel):
    """A validated run: one family, its grid, tolerances and optional outputs.

    Parameter expressions are parsed during validation; :attr:`values`
    returns them as functions and numbers.
    """

    model_config = _STRICT

    family: str
    params: dict[str, Any] = {}
    beta: Optional[list[list[list[Any]]]] = None
    layers: list[LayerSpec] = []
    kind: Optional[StochKind] = None
    horizon: float = DEFAULT_T_MAX
    grid: GridSpec = Field(default_factory=GridSpec)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    strict: bool = False
    simulation: Optional[SimulationSpec] = None
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator("family")
    @classmethod
    def _known_family(cls, v: str) -> str:
        if v not in catalog.CATALOG:
            raise ValueError(f"unknown family {v!r}; known: {', '.join(catalog.family_names())}")
        return v

    @field_validator("params")
    @classmethod
    def _params_parse(cls, v: dict[str, Any], info: ValidationInfo) -> dict[str, Any]:
        if "family" in info.data:
            _parsed(info.data["family"], v)
        return v

    @field_validator("beta")
    @classmethod
    def _beta_shape(cls, v: Optional[list[list[list[Any]]]]) -> Optional[list[list[list[Any]]]]:
        if v is None:
            return v
        if len(v) != 2 or any(len(row) != 2 or any(len(col) != 2 for col in row) for row in v):
            raise ValueError("beta must be a 2x2x2 nested list")
        spec = ParamSpec("beta")
        for row in v:
            for col in row:
                for item in col:
                    catalog.parse_value(spec, item)
        return v

    @field_validator("horizon")
    @classmethod
    def _positive_horizon(cls, v: float) -> float:
        if not v > 0:
            raise ValueError(f"horizon must be positive: {v}")
        return v

    @model_validator(mode="after")
    def _check_family_options(self) -> "RunConfig":
        entry = catalog.get(self.family)
        if entry.needs_layers and len(self.layers) != 2:
            raise ValueError(f"{self.family} needs exactly 2 layers, got {len(self.layers)}")
        if self.layers and not entry.needs_layers:
            raise ValueError(f"{self.family} does not take layers")
        if self.beta is not None and not entry.accepts_beta:
            raise ValueError(f"{self.family} does not take beta")
        if self.kind is not None and self.kind.is_cubic == entry.square:
            raise ValueError(f"kind {self.kind.value!r} does not fit the {self.family} family")
        if self.grid.t_max > self.horizon:
            raise ValueError(f"grid.t_max {self.grid.t_max} exceeds the horizon {self.horizon}")
        return self

    @property
    def entry(self) -> catalog.FamilyEntry:
        return catalog.get(self.family)

    @property
    def values(self) -> dict[str, ParamValue]:
        return _parsed(self.family, self.params)

    @property
    def beta_values(self) -> Optional[list[list[list[ParamValue]]]]:
        if self.beta is None:
            return None
        spec = ParamSpec("beta")
        return [[[catalog.parse_value(spec, x) for x in col] for col in row] for row in self.beta]

    def cutoffs(self) -> tuple[float, ...]:
        found = set(catalog.cutoffs(self.family, self.values))
        for layer in self.layers:
            found.update(catalog.cutoffs(layer.family, layer.values))
        return tuple(sorted(found))
