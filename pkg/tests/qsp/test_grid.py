"""Tests for qsp/grid.py."""

from __future__ import annotations

import math

import pytest

from qsp.defaults import CUTOFF_MIDPOINT_OFFSET
from qsp.errors import DomainError
from qsp.grid import Sampling, TimeGrid, VerificationReport, merge_reports


class TestTimeGrid:
    def test_uniform_default(self):
        grid = TimeGrid.uniform()
        assert len(grid) == 12
        assert grid.points[0] == 0.0
        assert grid.t_max == 5.0

    def test_cutoffs_bring_neighbours(self):
        grid = TimeGrid.uniform(5.0, 6, cutoffs=[2.5])
        for p in (2.5 - CUTOFF_MIDPOINT_OFFSET, 2.5, 2.5 + CUTOFF_MIDPOINT_OFFSET):
            assert p in grid.points

    def test_extra_outside_range_dropped(self):
        grid = TimeGrid.uniform(1.0, 3, extra=[0.25, 7.0])
        assert grid.points == (0.0, 0.25, 0.5, 1.0)

    def test_triples_strict(self):
        grid = TimeGrid((0.0, 1.0, 2.0, 3.0))
        triples = list(grid.triples())
        assert len(triples) == grid.triple_count() == math.comb(4, 3)
        assert all(s < tau < t for s, tau, t in triples)

    def test_pairs_and_shifts(self):
        grid = TimeGrid((1.0, 2.0, 4.0))
        assert list(grid.pairs()) == [(1.0, 2.0), (1.0, 4.0), (2.0, 4.0)]
        assert grid.shifts() == (1.0, 3.0)

    @pytest.mark.parametrize(
        ("points", "message"),
        [
            ((0.0, 1.0), "at least 3"),
            ((0.0, 2.0, 1.0), "strictly increasing"),
            ((-1.0, 0.0, 1.0), "nonnegative"),
            ((0.0, 1.0, float("inf")), "finite"),
        ],
    )
    def test_rejects(self, points, message):
        with pytest.raises(DomainError, match=message):
            TimeGrid(points)

    def test_uniform_needs_positive_horizon(self):
        with pytest.raises(DomainError):
            TimeGrid.uniform(0.0)


class TestSampling:
    def test_extra_points_join_both_grids(self):
        sampling = Sampling(t_max=1.0, samples=3, pair_points=2, extra=(0.25,))
        assert sampling.claim_times() == [0.0, 0.25, 0.5, 1.0]
        assert sampling.pair_times() == [0.0, 0.25, 1.0]
        assert len(list(sampling.pairs())) == 3

    def test_with_extra(self):
        sampling = Sampling(t_max=1.0, samples=2, pair_points=2).with_extra([0.5])
        assert sampling.extra == (0.5,)

    def test_validation(self):
        with pytest.raises(DomainError):
            Sampling(t_max=0.0)
        with pytest.raises(DomainError):
            Sampling(samples=1)


class TestVerificationReport:
    def test_statistics(self):
        report = VerificationReport.from_residuals(
            "kce", [((0.0, 1.0, 2.0), 1e-12), ((0.0, 1.0, 3.0), 5e-9)], tol=1e-9
        )
        assert report.count == 2
        assert report.max_residual == 5e-9
        assert report.failures == 1
        assert report.worst == (0.0, 1.0, 3.0)
        assert not report.passed

    def test_empty_report_passes(self):
        report = VerificationReport("kce", 1e-9)
        assert report.passed
        assert report.worst is None
        assert report.to_dict()["worst"] is None

    def test_merge_keeps_slot_maxima(self):
        a = VerificationReport.from_residuals("nine", [((1.0,), 0.0)], 1e-10, {"p_ff": 1e-13, "p_mm": 0.0})
        b = VerificationReport.from_residuals("nine", [((2.0,), 0.0)], 1e-10, {"p_ff": 1e-14, "p_mm": 2e-13})
        merged = merge_reports([a, b])
        assert merged.count == 2
        assert merged.slots == {"p_ff": 1e-13, "p_mm": 2e-13}
        assert merged.name == "nine"

    def test_merge_rejects_mixed_tolerances(self):
        with pytest.raises(DomainError, match="different tolerances"):
            VerificationReport("a", 1e-9).merge(VerificationReport("a", 1e-6))

    def test_merge_nothing(self):
        with pytest.raises(DomainError):
            merge_reports([])

    def test_to_dict_sorted_slots(self):
        report = VerificationReport.from_residuals("x", [((0.0,), 0.0)], 1.0, {"b": 1.0, "a": 2.0})
        payload = report.to_dict()
        assert list(payload["slots"]) == ["a", "b"]
        assert payload["passed"] is True
