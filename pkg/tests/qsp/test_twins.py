"""Tests for qsp/twins.py: the twin-birth branches, nine equations, reports."""

from __future__ import annotations

import pytest

from qsp.errors import E401_TWIN_BAND, W401_CONTINUITY, ConstructionError, DomainError
from qsp.families import kce_residual_cubic, m1_family
from qsp.grid import TimeGrid
from qsp.timefn import parse
from qsp.twins import (
    NO_LIMIT,
    TwinBranch,
    case_a_family,
    case_b_family,
    case_c_family,
    cantor_checks,
    persistent_positivity,
    twin_report,
    twin_reports,
    verify_nine_equations,
)

PHI = "1/(1+t)"


@pytest.fixture
def survival(fast_sampling):
    return case_b_family(PHI, "0.3", "0.3", phi_inf=0.0, sampling=fast_sampling)


@pytest.fixture
def cataclysm(fast_sampling):
    return case_c_family("0.3", "0.3", 2.5, sampling=fast_sampling)


@pytest.fixture
def cutoff_grid():
    return TimeGrid.uniform(5.0, 12, cutoffs=[2.5])


class TestNineEquations:
    def test_extinction(self, grid):
        family = case_a_family()
        report = verify_nine_equations(family, grid)
        assert report.passed
        assert report.max_residual == 0.0
        assert family.origin.branch is TwinBranch.EXTINCTION_A

    def test_survival(self, survival, grid):
        report = verify_nine_equations(survival, grid)
        assert report.passed, report.worst
        assert set(report.slots) == {"a", "b", "c", "alpha", "beta", "gamma", "u", "v", "w", "normalization"}
        assert report.count == grid.triple_count() + len(list(grid.pairs()))

    def test_cataclysm(self, cataclysm, cutoff_grid):
        assert verify_nine_equations(cataclysm, cutoff_grid).passed

    @pytest.mark.parametrize("name", ["survival", "cataclysm"])
    def test_agrees_with_cubic_kce(self, name, request, cutoff_grid):
        family = request.getfixturevalue(name)
        assert kce_residual_cubic(family, cutoff_grid).max_residual < 1e-9

    def test_growing_birth_rates(self, fast_sampling, grid):
        family = case_b_family(PHI, "(1+t)/3", "(1+t)/3", sampling=fast_sampling)
        assert family.warnings == ()
        report = verify_nine_equations(family, grid, 1e-10)
        assert report.passed, report.worst
        assert report.max_residual < 1e-10

    def test_requires_three_types(self, fast_sampling, grid):
        with pytest.raises(DomainError, match="m = 3"):
            verify_nine_equations(m1_family("0.5", "0.25", "0.25", fast_sampling), grid)


class TestSurvivalBranch:
    def test_entries(self, survival):
        mid = survival.at(1.0, 2.0).array[:, :, 1]
        assert mid[0, 0] == pytest.approx(1.0 / 3.0)
        assert mid[1, 0] == pytest.approx(0.1)
        assert mid[1, 1] == pytest.approx(0.1)
        assert mid[1, 2] == pytest.approx(1.4 / 3.0)
        assert mid.sum() == pytest.approx(1.0)

    def test_outflow_warns_in_grid_mode(self, fast_sampling, grid):
        family = case_b_family(PHI, "0.3", "0.3", b="0.01", sampling=fast_sampling)
        assert [w.code for w in family.warnings] == [W401_CONTINUITY]
        assert verify_nine_equations(family, grid).passed

    def test_outflow_rejected_in_strict_mode(self, fast_sampling):
        with pytest.raises(ConstructionError) as info:
            case_b_family(PHI, "0.3", "0.3", b="0.01", strict=True, sampling=fast_sampling)
        assert info.value.finding.code == E401_TWIN_BAND

    @pytest.mark.parametrize(
        ("overrides", "condition"),
        [
            ({"alpha": "0.8", "beta": "0.8"}, "alpha + beta <= 1/phi"),
            ({"b": "-0.1"}, "b >= 0"),
            ({"b": "1"}, "1/phi(t) - 1/phi(s) >= b+c+u+v+w"),
            ({"b": "2"}, "b * phi <= 1"),
            ({"u": "1.5 + t"}, "u * phi <= 1"),
            ({"phi_inf": -1.0}, "phi_inf >= 0"),
        ],
    )
    def test_band_violations(self, overrides, condition, fast_sampling):
        params = {"phi": PHI, "alpha": "0.3", "beta": "0.3"}
        params.update(overrides)
        with pytest.raises(ConstructionError) as info:
            case_b_family(sampling=fast_sampling, **params)
        assert info.value.finding.code == E401_TWIN_BAND
        assert info.value.finding.condition == condition


class TestCataclysmBranch:
    def test_branches(self, cataclysm):
        before = cataclysm.at(0.0, 2.0).array[:, :, 1]
        assert before[1].tolist() == pytest.approx([0.3, 0.3, 0.4])
        after = cataclysm.at(0.0, 2.5).array[:, :, 1]
        assert after[0, 0] == 1.0
        assert after.sum() == 1.0

    def test_rejects(self, fast_sampling):
        with pytest.raises(ConstructionError, match="alpha0 \\+ beta0"):
            case_c_family("0.6", "0.6", 2.5, sampling=fast_sampling)
        with pytest.raises(ConstructionError, match="cutoff > 0"):
            case_c_family("0.3", "0.3", 0.0, sampling=fast_sampling)


class TestCantor:
    def test_second_equation(self, grid):
        phi = parse(PHI)
        assert cantor_checks(lambda s, t: phi(t) / phi(s), grid).passed

    def test_first_equation(self, grid):
        assert cantor_checks(lambda s, t: t - s, grid, mode="first").passed
        assert not cantor_checks(lambda s, t: t - s, grid, mode="second").passed

    def test_unknown_mode(self, grid):
        with pytest.raises(DomainError):
            cantor_checks(lambda s, t: 1.0, grid, mode="third")


class TestPersistentPositivity:
    def test_survival_stays_positive(self, survival, grid):
        assert persistent_positivity(survival, 0.0, grid) == ()

    def test_cataclysm_vanishes_at_cutoff(self, cataclysm, cutoff_grid):
        found = dict(persistent_positivity(cataclysm, 0.0, cutoff_grid))
        assert set(found) == {"a", "alpha", "beta", "gamma"}
        assert found["alpha"] == 2.5


class TestReports:
    def test_survival_report(self, survival):
        report = twin_report(survival, 1.0, 2.0)
        assert report.female_female == pytest.approx(0.1)
        assert report.mixed == pytest.approx(1.4 / 3.0)
        assert report.male_male == 0.0
        assert report.no_offspring == pytest.approx(1.0 / 3.0)
        assert report.twin_to_single_female == pytest.approx(1.0)
        assert report.limit_status == "declared"
        assert report.limit_female_female == 0.0

    @pytest.mark.parametrize("alpha", ["0.5", "(1+t)/3"])
    def test_two_percent_twin_ratio(self, alpha, fast_sampling):
        family = case_b_family(PHI, alpha, f"0.02*({alpha})", sampling=fast_sampling)
        report = twin_report(family, 1.0, 2.0)
        assert report.twin_to_single_female == pytest.approx(0.02, abs=1e-12)

    def test_declared_positive_limit(self, fast_sampling):
        family = case_b_family("0.5 + 0.5/(1+t)", "0.3", "0.3", phi_inf=0.5, sampling=fast_sampling)
        report = twin_report(family, 0.0, 1.0)
        assert report.limit_female_female == pytest.approx(0.15)
        assert report.limit_mixed == pytest.approx(0.5 * (1.0 - 0.6))

    def test_no_limit_declared(self, fast_sampling):
        family = case_b_family(PHI, "0.3", "0.3", sampling=fast_sampling)
        report = twin_report(family, 0.0, 1.0)
        assert report.limit_status == NO_LIMIT
        assert report.to_dict()["limit_mixed"] is None

    def test_cataclysm_limits(self, cataclysm, grid):
        reports = twin_reports(cataclysm, grid)
        assert len(reports) == len(list(grid.pairs()))
        assert all(r.limit_status == "extinct after cutoff" for r in reports)

    def test_extinction_has_no_report(self, grid):
        with pytest.raises(DomainError):
            twin_report(case_a_family(), 0.0, 1.0)
