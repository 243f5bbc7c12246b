"""
Tests for the desk-scale verification checks of the closed forms.
"""

import math

import pytest
from pydantic import ValidationError

from config import settings
from core.errors import InvalidArgumentError
from core.schema import VerificationResult
from experiments.verification import (
    CHECKS,
    DISPLACEMENT_TOL,
    precision_bound_checks,
    run_verifications,
    verify_concentric_ball,
    verify_iso_wasserstein,
    verify_monotonicity,
    verify_partial_ot_marginal,
    verify_precision_bound,
)


class TestVerificationResult:
    def test_judge_kinds(self):
        assert VerificationResult.judge("a", 1.04, 1.0, 0.05, "relative").passed
        assert not VerificationResult.judge("a", 1.06, 1.0, 0.05, "relative").passed
        assert VerificationResult.judge("a", 0.5, 1.0, 0.0, "upper").passed
        assert not VerificationResult.judge("a", 0.5, 1.0, 0.1, "lower").passed

    def test_serializes_pass(self):
        result = VerificationResult.judge("a", 1.0, 1.0, 0.0)
        assert result.model_dump(by_alias=True)["pass"] is True

    def test_failed_condition_fails_check(self):
        result = VerificationResult.judge("a", 1.0, 1.0, 0.0, conditions={"matching": False})
        assert result.passed is False
        with pytest.raises(ValidationError):
            VerificationResult(name="a", passed=True, observed=1.0, expected=1.0, tolerance=0.0,
                               conditions={"matching": False})


class TestConcentricBall:
    def test_plane(self):
        result = verify_concentric_ball(2, 0.5, 1.0, 2000, seed=0)
        assert result.expected == pytest.approx(math.sqrt(0.5) * 0.5)
        assert result.passed
        assert result.runtime_seconds > 0

    def test_matching_tracks_scaling_map(self):
        result = verify_concentric_ball(2, 0.5, 1.0, 2000, seed=0)
        assert result.details["displacement_error"] <= DISPLACEMENT_TOL
        assert result.conditions == {"displacement_within_tolerance": True}

    def test_equal_radii(self):
        result = verify_concentric_ball(2, 1.0, 1.0, 1000, seed=0)
        assert result.expected == 0.0 and result.tolerance_kind == "upper"
        assert result.passed

    def test_point_mass(self):
        result = verify_concentric_ball(3, 0.0, 1.0, 1000, seed=1)
        assert result.expected == pytest.approx(math.sqrt(3.0 / 5.0))
        assert result.passed

    def test_error_shrinks_with_samples(self):
        coarse = verify_concentric_ball(2, 0.5, 1.0, 500, seed=3)
        fine = verify_concentric_ball(2, 0.5, 1.0, 2000, seed=3)
        assert abs(fine.observed - fine.expected) < abs(coarse.observed - coarse.expected)

    def test_deterministic(self):
        a = verify_concentric_ball(2, 0.5, 1.0, 300, seed=5)
        b = verify_concentric_ball(2, 0.5, 1.0, 300, seed=5)
        assert a.observed == b.observed

    def test_order(self):
        with pytest.raises(InvalidArgumentError):
            verify_concentric_ball(2, 1.0, 0.5, 100, seed=0)


class TestIsoWasserstein:
    def test_concentric_wins(self):
        result = verify_iso_wasserstein(16, 2.0, None, 30, seed=0)
        assert result.passed
        assert result.details["wins"] == 30

    def test_all_cells(self):
        result = verify_iso_wasserstein(8, 1.5, 52, 3, seed=0)
        assert result.passed

    def test_clamps_to_exact_limit(self, monkeypatch):
        monkeypatch.setattr(settings, "EXACT_SOLVER_LIMIT", 40)
        result = verify_iso_wasserstein(8, 1.5, 52, 3, seed=0)
        assert result.details["subset_cells"] == 40

    def test_too_many_cells(self):
        with pytest.raises(InvalidArgumentError):
            verify_iso_wasserstein(8, 1.5, 10 ** 4, 1, seed=0)


class TestPartialMarginal:
    def test_saturated_ball(self):
        result = verify_partial_ot_marginal(6, 5, seed=0, support_cells=5)
        assert result.observed == 0.0

    def test_small_grid(self):
        assert verify_partial_ot_marginal(10, 4, seed=0, support_cells=16).passed

    def test_bad_sizes(self):
        with pytest.raises(InvalidArgumentError):
            verify_partial_ot_marginal(4, 20, seed=0)


class TestPrecisionBound:
    def test_two_dimensional_case(self):
        worst, avg = precision_bound_checks(n=2, m=1, N=2000, seed=0, k_target=50)
        assert worst.passed and avg.passed

    def test_huge_retrieval_radius_retrieves_everything(self):
        worst, _ = precision_bound_checks(n=4, m=2, N=2000, r_v=50.0, seed=1, k_target=40)
        assert worst.details["retrieved"] == 1999
        assert worst.observed < 0.1

    def test_folded_result(self):
        result = verify_precision_bound(n=6, m=2, N=3000, seed=0)
        assert result.name == "precision_bound"
        assert result.observed in (0.0, 1.0, 2.0)


class TestMonotonicity:
    def test_growing_radii(self):
        assert verify_monotonicity(2, 0.25, [0.25, 0.5, 1.0], 800, seed=0).passed

    def test_rejects_decreasing(self):
        with pytest.raises(InvalidArgumentError):
            verify_monotonicity(2, 0.25, [1.0, 0.5], 100, seed=0)


class TestRunVerifications:
    def test_unknown_check(self):
        with pytest.raises(InvalidArgumentError):
            run_verifications(["nope"])

    def test_selection_order(self):
        results = run_verifications(["monotonicity", "concentric"], seed=0)
        assert [r.name for r in results] == ["concentric_ball", "monotonicity"]

    @pytest.mark.slow
    def test_all_pass(self):
        results = run_verifications(["all"], seed=0)
        assert len(results) == len(CHECKS)
        assert all(r.passed for r in results)
