"""Tests for qsp/families.py: cubic families, KCE verification, classifier."""

from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qsp.cubic import BinaryOpTable, StochKind, contract_second, is_stochastic
from qsp.errors import (
    E101_CLAIM,
    E202_LAYER_KIND,
    E301_BAND,
    E303_FLOW_SINGULAR,
    E304_FLOW_NOT_LEFT,
    E305_SPLIT,
    W301_CUTOFF_COUPLING,
    ConstructionError,
    DomainError,
)
from qsp.families import (
    CubicProcessFamily,
    MatrixFlow,
    Product,
    ProductTag,
    TimeDependence,
    classify_time_dependence,
    direct_sum_30,
    kce_residual_cubic,
    m1_family,
    m2_family,
    m3_family,
    n_family,
    p3_flow,
    split_from_functions,
    stochasticity_report_cubic,
    theorem_a_family,
)
from qsp.grid import TimeGrid
from qsp.markov_square import kce_residual_square, q1, q2, q4, q5

PSI = "(1 + exp(-t))/2"
RISING = "0.6 + 0.3*(1 - exp(-t))"
FALLING = "0.4 - 0.3*(1 - exp(-t))"


def _m2(sampling, **overrides):
    params = {
        "psi": PSI,
        "zeta11": "0.5",
        "zeta21": "0.5",
        "gamma11": f"1/(2*{PSI})",
        "gamma21": f"-1/(2*{PSI})",
    }
    params.update(overrides)
    return m2_family(sampling=sampling, **params)


def _n(sampling):
    return n_family(
        RISING, RISING,
        f"({RISING})/2", f"(1 - ({RISING}))/2", f"(1 - ({RISING}))/2", f"({RISING})/2",
        sampling,
    )


def _random_pairs(rng, count=200, t_max=5.0):
    for _ in range(count):
        s, t = sorted(rng.uniform(0.0, t_max, size=2).tolist())
        yield s, t


class TestProduct:
    def test_labels(self):
        assert Product.zero().label() == "*0"
        assert Product.projection(2).label() == "*a0"
        assert Product(ProductTag.MAKSIMOV_A, BinaryOpTable([[0, 1], [1, 1]])).label() == "*a"

    def test_op_required_for_a_product(self):
        with pytest.raises(DomainError):
            Product(ProductTag.MAKSIMOV_A)
        with pytest.raises(DomainError):
            Product(ProductTag.MAKSIMOV0, BinaryOpTable.projection(2))

    def test_family_kind_restricted(self):
        with pytest.raises(DomainError, match="twice"):
            CubicProcessFamily("x", 2, lambda s, t: np.zeros((2, 2, 2)), StochKind.TWICE, Product.zero())


class TestKolmogorovChapman:
    def _all(self, sampling):
        return [
            direct_sum_30([q2("exp(-t)", sampling), q4("1/(1+t)", sampling)]),
            m1_family("0.5 + 0.25*sin(t)", "0.25 + 0.1*sin(t)", "0.2", sampling),
            _m2(sampling),
            m3_family("0.5 + 0.5*exp(-t)", "1/(1+t)", 2.5, sampling=sampling),
            theorem_a_family(p3_flow(RISING, RISING, sampling), sampling=sampling),
            _n(sampling),
        ]

    @pytest.mark.parametrize("index", range(6))
    def test_every_family_satisfies_kce(self, index, fast_sampling):
        family = self._all(fast_sampling)[index]
        grid = TimeGrid.uniform(5.0, 12, cutoffs=family.cutoffs)
        report = kce_residual_cubic(family, grid)
        assert report.count >= 120
        assert report.max_residual < 1e-9, report.worst

    @pytest.mark.parametrize("index", range(6))
    def test_declared_kind_at_random_pairs(self, index, fast_sampling, rng):
        family = self._all(fast_sampling)[index]
        for s, t in _random_pairs(rng):
            assert is_stochastic(family.at(s, t), family.kind), (s, t)

    def test_direct_sum_residual_is_layer_maximum(self, fast_sampling, grid):
        layers = [q2("exp(-t)", fast_sampling), q4("1/(1+t)", fast_sampling)]
        cubic = kce_residual_cubic(direct_sum_30(layers), grid).max_residual
        square = max(kce_residual_square(layer, grid).max_residual for layer in layers)
        assert cubic == pytest.approx(square, abs=1e-15)

    def test_oracle_slot(self, fast_sampling, grid):
        family = m1_family("0.5", "0.25", "0.25", fast_sampling)
        report = kce_residual_cubic(family, grid, oracle_rate=1.0)
        assert report.slots["oracle"] < 1e-12
        assert report.max_residual < 1e-12
        assert "oracle" not in kce_residual_cubic(
            direct_sum_30([q2("exp(-t)", fast_sampling)] * 2), grid, oracle_rate=1.0
        ).slots

    def test_uncoupled_m3_fails_across_cutoff(self, fast_sampling):
        family = m3_family("0.5 + 0.5*exp(-t)", "1/(1+t)", 2.5, kappa11="0.25", sampling=fast_sampling)
        assert [w.code for w in family.warnings] == [W301_CUTOFF_COUPLING]
        report = kce_residual_cubic(family, TimeGrid.uniform(5.0, 12, cutoffs=[2.5]))
        assert not report.passed
        s, tau, t = report.worst
        assert tau < 2.5 <= t


class TestDirectSum:
    def test_layers_become_second_slices(self, fast_sampling):
        layers = [q2("exp(-t)", fast_sampling), q4("1/(1+t)", fast_sampling)]
        family = direct_sum_30(layers)
        q = family.at(0.5, 2.0)
        for j, layer in enumerate(layers):
            assert_allclose(q.array[:, j, :], layer.at(0.5, 2.0).array)
        assert family.product.label() == "*0"
        assert family.describe()["params"]["layer1"] == "q4"

    def test_left_stochastic_layer_rejected(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            direct_sum_30([q1("0.5", fast_sampling), q2("exp(-t)", fast_sampling)])
        assert info.value.finding.code == E202_LAYER_KIND

    def test_layer_count(self, fast_sampling):
        with pytest.raises(DomainError, match="exactly 2 layers"):
            direct_sum_30([q2("exp(-t)", fast_sampling)])


class TestM1:
    def test_uniform_instance(self, fast_sampling):
        q = m1_family("0.5", "0.25", "0.25", fast_sampling).at(1.0, 3.0)
        assert_allclose(q.array, np.full((2, 2, 2), 0.25))

    def test_t_independent(self, fast_sampling):
        family = m1_family("0.5 + 0.25*sin(t)", "0.25 + 0.1*sin(t)", "0.2", fast_sampling)
        assert family.at(1.0, 2.0) == family.at(1.0, 4.5)

    def test_u21_above_one_minus_g(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            m1_family("1", "0.5", "0.2", fast_sampling)
        assert info.value.finding.code == E301_BAND
        assert info.value.finding.condition == "bounds on u21"


class TestM2:
    def test_contraction_is_q2(self, fast_sampling):
        family = _m2(fast_sampling)
        square = q2(PSI, fast_sampling)
        for s, t in [(0.0, 1.0), (0.5, 4.0), (2.0, 2.0)]:
            assert_allclose(contract_second(family.at(s, t)).array, square.at(s, t).array, atol=1e-12)

    def test_zero_gamma21_rejected(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            _m2(fast_sampling, gamma21="0")
        assert info.value.finding.code == E301_BAND
        assert "gamma21" in info.value.finding.condition

    def test_uniform_bands_with_psi_inf(self, fast_sampling):
        family = _m2(fast_sampling, psi_inf=0.5)
        assert family.params["psi_inf"] == "0.5"
        with pytest.raises(ConstructionError):
            _m2(fast_sampling, psi_inf=0.0)

    def test_increasing_psi_rejected(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            _m2(fast_sampling, psi="1 + t")
        assert info.value.finding.code == E101_CLAIM


class TestM3:
    def test_branches(self, fast_sampling):
        family = m3_family("1", "1", 2.0, sampling=fast_sampling)
        early = family.at(0.0, 1.0).array
        assert early[0, 0, 0] == 1.0 and early[1, 0, 1] == 1.0
        assert early.sum() == 2.0
        late = family.at(0.0, 2.0).array
        assert_allclose(late[:, 0, :], 0.5)
        assert_allclose(late[:, 1, :], 0.0)

    def test_explicit_quarter_kappas(self, fast_sampling):
        family = m3_family("1", "1", 2.0, kappa11="0.25", kappa21="0.25", sampling=fast_sampling)
        assert_allclose(family.at(1.0, 3.0).array, 0.25)
        assert len(family.warnings) == 2
        assert family.describe()["warnings"][0]["code"] == W301_CUTOFF_COUPLING

    def test_kappa_range(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            m3_family("1", "1", 2.0, kappa11="0.6", sampling=fast_sampling)
        assert info.value.finding.code == E301_BAND

    def test_cutoff_positive(self, fast_sampling):
        with pytest.raises(ConstructionError):
            m3_family("1", "1", 0.0, sampling=fast_sampling)


class TestInverseFlow:
    def test_p3_flow_at_zero(self, fast_sampling):
        flow = p3_flow(RISING, RISING, fast_sampling)
        assert_allclose(flow.at(0.0).array, [[0.6, 0.4], [0.4, 0.6]])
        u = flow.transition(0.0, 1.0).array
        assert u.min() >= 0
        assert_allclose(u.sum(axis=0), [1.0, 1.0])

    def test_p3_flow_singular_rejected(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            p3_flow("0.5", "0.5", fast_sampling)
        assert info.value.finding.code == E101_CLAIM

    @pytest.mark.parametrize(("a", "b", "condition"), [("1", RISING, "a in (0, 1)"), (RISING, "0", "b in (0, 1)")])
    def test_p3_flow_endpoints_rejected(self, a, b, condition, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            p3_flow(a, b, fast_sampling)
        assert info.value.finding.code == E101_CLAIM
        assert info.value.finding.condition == condition

    def test_p3_flow_decreasing_variant(self, fast_sampling):
        assert p3_flow(FALLING, FALLING, fast_sampling).params["variant"] == "decreasing"

    def test_singular_flow(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            MatrixFlow.from_function(2, lambda t: [[1.0, t], [1.0, t]], sampling=fast_sampling)
        assert info.value.finding.code == E303_FLOW_SINGULAR

    def test_condition_i(self, fast_sampling):
        flow = MatrixFlow.from_function(2, lambda t: [[1.0 + t, 0.0], [0.0, 1.0]], sampling=fast_sampling)
        with pytest.raises(ConstructionError) as info:
            theorem_a_family(flow, sampling=fast_sampling)
        assert info.value.finding.code == E304_FLOW_NOT_LEFT

    def test_condition_ii_split(self, fast_sampling):
        flow = p3_flow(RISING, RISING, fast_sampling)
        with pytest.raises(ConstructionError) as info:
            theorem_a_family(flow, beta=lambda s: np.zeros((2, 2, 2)), sampling=fast_sampling)
        assert info.value.finding.code == E305_SPLIT

    def test_contraction_is_transition(self, fast_sampling):
        flow = p3_flow(RISING, RISING, fast_sampling)
        family = theorem_a_family(flow, sampling=fast_sampling)
        for s, t in [(0.0, 0.5), (1.0, 4.0)]:
            assert_allclose(contract_second(family.at(s, t)).array, flow.transition(s, t).array, atol=1e-12)

    def test_n_matches_theorem_a(self, fast_sampling):
        n = _n(fast_sampling)
        half = f"0.5*({RISING})"
        rest = f"0.5*(1 - ({RISING}))"
        beta = [[[half, rest], [half, rest]], [[rest, half], [rest, half]]]
        flow = p3_flow(RISING, RISING, fast_sampling)
        direct = theorem_a_family(flow, split_from_functions(2, beta), fast_sampling)
        for s, t in [(0.0, 0.0), (0.3, 1.2), (2.0, 5.0)]:
            assert n.at(s, t).max_abs_diff(direct.at(s, t)) < 1e-10

    def test_n_bounds(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            n_family(RISING, RISING, f"{RISING} + 0.1", "0", "0", "0", fast_sampling)
        assert info.value.finding.code == E301_BAND

    def test_n_needs_increasing_flow(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            n_family(FALLING, FALLING, "0", "0", "0", "0", fast_sampling)
        assert info.value.finding.code == E101_CLAIM
        assert info.value.finding.condition == "a + b - 1 > 0"

    def test_split_shape(self):
        with pytest.raises(DomainError, match="2x2x2"):
            split_from_functions(2, [[["1", "1"]]])


class TestStochasticityReport:
    def test_kind_override(self, fast_sampling, grid):
        family = m1_family("0.5", "0.25", "0.25", fast_sampling)
        assert stochasticity_report_cubic(family, grid).passed
        report = stochasticity_report_cubic(family, grid, kind=StochKind.THREE)
        assert not report.passed
        assert report.max_residual == pytest.approx(0.5)

    def test_square_kind_rejected(self, fast_sampling, grid):
        family = m1_family("0.5", "0.25", "0.25", fast_sampling)
        with pytest.raises(DomainError, match="not a cubic"):
            stochasticity_report_cubic(family, grid, kind=StochKind.LEFT)


class TestClassifier:
    def test_constant_m1_homogeneous(self, fast_sampling, grid):
        family = m1_family("0.5", "0.25", "0.25", fast_sampling)
        assert classify_time_dependence(family, grid).kind is TimeDependence.HOMOGENEOUS

    def test_m2_general(self, fast_sampling, grid):
        result = classify_time_dependence(_m2(fast_sampling), grid)
        assert result.kind is TimeDependence.GENERAL
        assert result.period is None

    def test_periodic_in_t(self, fast_sampling, grid):
        result = classify_time_dependence(q5("0.5 + 0.5*sin(t)", fast_sampling), grid)
        assert result.kind is TimeDependence.PERIODIC_IN_T
        assert result.period == pytest.approx(2 * math.pi)
        assert result.to_dict()["kind"] == "periodic_in_t"
