"""Tests for harness/schemas.py and the family catalog behind it."""

from __future__ import annotations

import pytest
from pydantic import ValidationError

from harness import catalog
from harness.schemas import GridSpec, RunConfig, SimulationSpec, Tolerances
from qsp.cubic import StochKind
from qsp.defaults import KCE_TOL
from qsp.timefn import ScalarTimeFunction

M1 = {"g": "0.5", "u11": "0.25", "u21": "0.25"}


def _cfg(**overrides) -> RunConfig:
    data = {"family": "m1", "params": dict(M1)}
    data.update(overrides)
    return RunConfig.model_validate(data)


class TestRunConfig:
    def test_minimal_defaults(self):
        cfg = _cfg()
        assert cfg.grid.t_max == 5.0
        assert cfg.grid.points == 12
        assert cfg.tolerances.kce_tol == KCE_TOL
        assert cfg.horizon == 10.0
        assert cfg.output.matrix_format == "json"
        assert all(isinstance(v, ScalarTimeFunction) for v in cfg.values.values())

    def test_unknown_family(self):
        with pytest.raises(ValidationError, match="unknown family 'm9'; known: q1"):
            RunConfig.model_validate({"family": "m9"})

    def test_missing_param_names_signature(self):
        with pytest.raises(ValidationError, match=r"m1 is missing u21; signature m1\(g, u11, u21\)"):
            _cfg(params={"g": "0.5", "u11": "0.25"})

    def test_unknown_param(self):
        with pytest.raises(ValidationError, match="m1 does not take zeta"):
            _cfg(params={**M1, "zeta": "1"})

    def test_expression_error_position(self):
        with pytest.raises(ValidationError, match="g: unexpected end of input at position 5"):
            _cfg(params={**M1, "g": "0.5*("})

    def test_number_params_stay_numbers(self):
        cfg = RunConfig.model_validate({"family": "q3", "params": {"b": 2}})
        assert cfg.values["b"] == 2.0
        assert cfg.cutoffs() == (2.0,)
        with pytest.raises(ValidationError, match="b must be a plain number"):
            RunConfig.model_validate({"family": "q3", "params": {"b": "2"}})

    def test_numeric_function_param(self):
        cfg = _cfg(params={"g": 0.5, "u11": 0.25, "u21": 0})
        assert cfg.values["u21"](3.0) == 0.0

    def test_extra_keys_forbidden(self):
        with pytest.raises(ValidationError):
            _cfg(constants={"x": 1})

    def test_kind_must_fit(self):
        assert _cfg(kind="3").kind is StochKind.THREE
        with pytest.raises(ValidationError, match="does not fit"):
            _cfg(kind="left")
        with pytest.raises(ValidationError, match="does not fit"):
            RunConfig.model_validate({"family": "q2", "params": {"psi": "exp(-t)"}, "kind": "12"})

    def test_grid_within_horizon(self):
        with pytest.raises(ValidationError, match="exceeds the horizon"):
            _cfg(horizon=4.0)

    def test_beta_only_for_theorem_a(self):
        beta = [[["0.3", "0.2"], ["0.3", "0.2"]], [["0.2", "0.3"], ["0.2", "0.3"]]]
        cfg = RunConfig.model_validate({"family": "theorem_a", "params": {"a": "0.6", "b": "0.6"}, "beta": beta})
        assert cfg.beta_values[1][0][1](0.0) == 0.3
        with pytest.raises(ValidationError, match="does not take beta"):
            _cfg(beta=beta)
        with pytest.raises(ValidationError, match="2x2x2"):
            RunConfig.model_validate({"family": "theorem_a", "params": {"a": "0.6", "b": "0.6"}, "beta": [[["1"]]]})


class TestLayers:
    def _layers(self):
        return [
            {"family": "q3", "params": {"b": 1.5}},
            {"family": "q7", "params": {"a": 2.0, "g": "1/(1+t)"}},
        ]

    def test_direct_sum(self):
        cfg = RunConfig.model_validate({"family": "direct_sum_30", "layers": self._layers()})
        assert cfg.cutoffs() == (1.5, 2.0)

    def test_direct_sum_needs_two_layers(self):
        with pytest.raises(ValidationError, match="needs exactly 2 layers"):
            RunConfig.model_validate({"family": "direct_sum_30", "layers": self._layers()[:1]})

    def test_layers_only_for_direct_sum(self):
        with pytest.raises(ValidationError, match="does not take layers"):
            _cfg(layers=self._layers())

    def test_layer_must_be_square(self):
        with pytest.raises(ValidationError, match="layer family must be one of"):
            RunConfig.model_validate({
                "family": "direct_sum_30",
                "layers": [{"family": "m1", "params": M1}, self._layers()[0]],
            })

    def test_layer_params_checked(self):
        with pytest.raises(ValidationError, match="q7 is missing g"):
            RunConfig.model_validate({
                "family": "direct_sum_30",
                "layers": [self._layers()[0], {"family": "q7", "params": {"a": 2.0}}],
            })


class TestSections:
    def test_grid_validation(self):
        with pytest.raises(ValidationError):
            GridSpec(points=2)
        with pytest.raises(ValidationError):
            GridSpec(t_max=0.0)
        with pytest.raises(ValidationError, match="outside"):
            GridSpec(t_max=5.0, extra_points=[6.0])

    def test_tolerances_positive(self):
        with pytest.raises(ValidationError):
            Tolerances(kce_tol=0.0)

    def test_simulation(self):
        spec = SimulationSpec(x0=[0.2, 0.8], s0=1.0, times=[2.0, 3.0])
        assert spec.mode == "one_shot"

    @pytest.mark.parametrize(
        ("data", "message"),
        [
            ({"x0": [0.5, 0.6], "times": [1.0]}, "probability vector"),
            ({"x0": [1.0], "times": [1.0]}, "between 2 and 8"),
            ({"x0": [0.5, 0.5], "times": []}, "non-empty"),
            ({"x0": [0.5, 0.5], "s0": 2.0, "times": [1.0]}, "must exceed s0"),
            ({"x0": [0.5, 0.5], "times": [2.0, 1.0]}, "strictly increasing"),
            ({"x0": [0.5, 0.5], "times": [1.0], "mode": "sideways"}, "mode"),
        ],
    )
    def test_simulation_rejects(self, data, message):
        with pytest.raises(ValidationError, match=message):
            SimulationSpec.model_validate(data)


class TestCatalog:
    def test_every_family_listed(self):
        text = catalog.list_families()
        for name in catalog.family_names():
            assert f"\n{name}(" in text
        assert "m2(psi, zeta11, zeta21, gamma11, gamma21, [psi_inf:number])" in text
        assert "direct_sum_30(layers)" in text
        assert "theorem_a(a, b, [beta])" in text

    def test_names(self):
        assert catalog.family_names()[:7] == ["q1", "q2", "q3", "q4", "q5", "q6", "q7"]
        assert {"direct_sum_30", "m1", "m2", "m3", "theorem_a", "n", "twin_a", "twin_b", "twin_c"} <= set(
            catalog.family_names()
        )

    def test_parse_value_rejects_bool(self):
        with pytest.raises(ValueError):
            catalog.parse_value(catalog.ParamSpec("g"), True)
